use slrprune_core::projection::project_cardinality;
use slrprune_core::rng::Rng;
use slrprune_core::Tensor;

/// Best support of size `min(l, n)` by enumerating every subset.
fn brute_force(v: &[f64], l: usize) -> (f64, Vec<u32>) {
    let n = v.len();
    let k = l.min(n);
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let dist: f64 = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| v[i] * v[i]).sum();
        if dist < best.0 {
            best = (dist, vec![mask]);
        } else if dist == best.0 {
            best.1.push(mask);
        }
    }
    best
}

#[test]
fn matches_enumeration_on_random_tensors() {
    let mut rng = Rng::new(2024);
    let mut checked = 0;
    while checked < 1200 {
        let n = 1 + rng.below(12);
        // Coarse values on some tensors force magnitude ties.
        let coarse = rng.next_f64() < 0.2;
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let x = rng.uniform(-3.0, 3.0);
                if coarse {
                    x.round()
                } else {
                    x
                }
            })
            .collect();
        let t = Tensor::vector(v.clone()).unwrap();
        for l in 0..=n {
            let p = project_cardinality(&t, l).unwrap();
            let (best, supports) = brute_force(&v, l);
            let dist = p.sub(&t).unwrap().frobenius_norm_sq();
            assert!((dist - best).abs() <= 1e-12, "n={n} l={l}: {dist} vs {best}");
            let mut support = 0u32;
            for (i, (&pi, &vi)) in p.data().iter().zip(&v).enumerate() {
                if pi != 0.0 {
                    assert_eq!(pi, vi, "kept entries are copied unchanged");
                    support |= 1 << i;
                }
            }
            // Zero entries may be kept or dropped at no cost.
            let zero_bits: u32 = (0..n).filter(|&i| v[i] == 0.0).map(|i| 1 << i).sum();
            assert!(
                supports.iter().any(|s| s & !zero_bits == support & !zero_bits),
                "n={n} l={l}: support {support:b} not optimal"
            );
            assert!(p.count_nonzero() <= l);
        }
        checked += 1;
    }
}

#[test]
fn two_by_two_example() {
    let v = Tensor::from_vec(&[2, 2], vec![0.5, -2.0, 1.5, 0.1]).unwrap();
    let p = project_cardinality(&v, 2).unwrap();
    assert_eq!(p.data(), &[0.0, -2.0, 1.5, 0.0]);
    assert_eq!(p.shape(), &[2, 2]);
}
