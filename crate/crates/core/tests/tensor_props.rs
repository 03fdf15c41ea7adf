use deeptd::tensor::{
    contract_all_but, frobenius_norm, inner_product, outer_product, tensorize, vectorize,
};
use deeptd::{DenseTensor, TensorShape};
use proptest::prelude::*;

fn dims_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

fn shape_and_entries(max_order: usize, max_dim: usize) -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    dims_strategy(max_order, max_dim).prop_flat_map(|dims| {
        let p: usize = dims.iter().product();
        (Just(dims), prop::collection::vec(-10.0f64..10.0, p))
    })
}

fn factors_for(dims: &[usize]) -> impl Strategy<Value = Vec<Vec<f64>>> {
    dims.iter()
        .map(|&d| prop::collection::vec(-2.0f64..2.0, d))
        .collect::<Vec<_>>()
}

/// Mixed-radix digits of `i`, mode 1 fastest.
fn digits(mut i: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&d| {
            let r = i % d;
            i /= d;
            r
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tensorize_vectorize_roundtrip((dims, x) in shape_and_entries(5, 4)) {
        let shape = TensorShape::new(dims).unwrap();
        let t = tensorize(&x, &shape).unwrap();
        prop_assert_eq!(vectorize(&t), x);
    }

    #[test]
    fn tensorize_places_each_coordinate_at_its_digits(dims in dims_strategy(5, 4)) {
        let p: usize = dims.iter().product();
        prop_assume!(p <= 256);
        let shape = TensorShape::new(dims.clone()).unwrap();
        for i in 0..p {
            let mut x = vec![0.0; p];
            x[i] = 1.0;
            let t = tensorize(&x, &shape).unwrap();
            let idx = digits(i, &dims);
            prop_assert_eq!(t.get(&idx).unwrap(), 1.0);
            prop_assert_eq!(frobenius_norm(&t), 1.0);
            prop_assert_eq!(shape.linear_index(&idx).unwrap(), i);
            prop_assert_eq!(shape.multi_index(i), idx);
        }
    }

    #[test]
    fn outer_product_is_multilinear(
        (dims, a, b, alpha, beta, mode) in dims_strategy(4, 4).prop_flat_map(|dims| {
            let order = dims.len();
            (Just(dims.clone()), factors_for(&dims), factors_for(&dims), -3.0f64..3.0, -3.0f64..3.0, 0..order)
        })
    ) {
        let _ = dims;
        let mut mixed = a.clone();
        mixed[mode] = a[mode].iter().zip(&b[mode]).map(|(x, y)| alpha * x + beta * y).collect();
        let mut other = a.clone();
        other[mode] = b[mode].clone();
        let lhs = outer_product(&mixed).unwrap();
        let rhs = outer_product(&a).unwrap().scaled(alpha)
            .add_scaled(&outer_product(&other).unwrap(), beta).unwrap();
        let scale = 1.0 + rhs.max_abs();
        for (l, r) in lhs.entries().iter().zip(rhs.entries()) {
            prop_assert!((l - r).abs() <= 1e-12 * scale, "{} vs {}", l, r);
        }
    }

    #[test]
    fn contraction_matches_inner_product(
        ((dims, entries), mode) in shape_and_entries(5, 4).prop_flat_map(|(dims, e)| {
            let order = dims.len();
            (Just((dims, e)), 0..order)
        }),
        seed in any::<u64>(),
    ) {
        let shape = TensorShape::new(dims.clone()).unwrap();
        let t = DenseTensor::from_entries(shape, entries).unwrap();
        // deterministic pseudo-random factors from the seed
        let mut s = seed | 1;
        let mut next = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let factors: Vec<Vec<f64>> = dims.iter().map(|&d| (0..d).map(|_| next()).collect()).collect();
        let c = contract_all_but(&t, &factors, mode).unwrap();
        prop_assert_eq!(c.len(), dims[mode]);
        let full = inner_product(&t, &outer_product(&factors).unwrap()).unwrap();
        let via: f64 = c.iter().zip(&factors[mode]).map(|(a, b)| a * b).sum();
        let scale = 1.0 + frobenius_norm(&t) * factors.iter()
            .map(|f| f.iter().map(|v| v * v).sum::<f64>().sqrt()).product::<f64>();
        prop_assert!((full - via).abs() <= 1e-10 * scale, "{} vs {}", full, via);

        // entrywise against a direct multi-index loop
        for (j, cj) in c.iter().enumerate() {
            let mut direct = 0.0;
            for (i, v) in t.entries().iter().enumerate() {
                let idx = digits(i, &dims);
                if idx[mode] != j {
                    continue;
                }
                let w: f64 = idx.iter().enumerate()
                    .filter(|(m, _)| *m != mode)
                    .map(|(m, &k)| factors[m][k])
                    .product();
                direct += v * w;
            }
            prop_assert!((cj - direct).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn cauchy_schwarz((dims, a) in shape_and_entries(4, 4), seed in any::<u64>()) {
        let shape = TensorShape::new(dims).unwrap();
        let mut s = seed | 1;
        let b: Vec<f64> = (0..a.len()).map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let ta = DenseTensor::from_entries(shape.clone(), a).unwrap();
        let tb = DenseTensor::from_entries(shape, b).unwrap();
        let ip = inner_product(&ta, &tb).unwrap();
        prop_assert!(ip.abs() <= frobenius_norm(&ta) * frobenius_norm(&tb) * (1.0 + 1e-12) + 1e-300);
        prop_assert!((inner_product(&ta, &ta).unwrap() - frobenius_norm(&ta).powi(2)).abs()
            <= 1e-12 * (1.0 + frobenius_norm(&ta).powi(2)));
    }

    #[test]
    fn outer_product_norm_is_product_of_norms(
        factors in dims_strategy(4, 5).prop_flat_map(|dims| factors_for(&dims))
    ) {
        let t = outer_product(&factors).unwrap();
        let expected: f64 = factors.iter().map(|f| f.iter().map(|v| v * v).sum::<f64>().sqrt()).product();
        prop_assert!((frobenius_norm(&t) - expected).abs() <= 1e-12 * (1.0 + expected));
    }
}

#[test]
fn shape_rejects_bad_dims() {
    assert!(TensorShape::new(vec![]).is_err());
    assert!(TensorShape::new(vec![2, 0, 3]).is_err());
    assert!(TensorShape::new(vec![usize::MAX, 3]).is_err());
    let s = TensorShape::new(vec![2, 3]).unwrap();
    assert!(s.linear_index(&[2, 0]).is_err());
    assert!(s.linear_index(&[0]).is_err());
}

#[test]
fn mismatched_shapes_are_rejected() {
    let a = DenseTensor::zeros(TensorShape::new(vec![2, 3]).unwrap());
    let b = DenseTensor::zeros(TensorShape::new(vec![3, 2]).unwrap());
    assert!(inner_product(&a, &b).is_err());
    assert!(a.add_scaled(&b, 1.0).is_err());
    assert!(contract_all_but(&a, &[vec![1.0, 0.0], vec![1.0, 0.0]], 0).is_err());
    assert!(contract_all_but(&a, &[vec![1.0, 0.0], vec![1.0, 0.0, 0.0]], 2).is_err());
}
