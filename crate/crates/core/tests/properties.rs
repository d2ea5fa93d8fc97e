//! Algebraic invariants on random series and random connected graphs.

use bzk::graph::{build_graph, Graph};
use bzk::operator::{cm_sequence, cm_sequence_numeric};
use bzk::series::{int, rat, OperatorSeries, PolyMatrix, Rational, TPoly, USeries};
use bzk::zeta::symmetric_eigen;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

const ORDER: usize = 6;

fn tpoly() -> impl Strategy<Value = TPoly> {
    prop::collection::vec(-4i64..=4, 0..3).prop_map(|c| TPoly::from_ints(&c))
}

fn series() -> impl Strategy<Value = USeries> {
    prop::collection::vec(tpoly(), ORDER + 1).prop_map(|c| USeries::from_coeffs(c, ORDER))
}

/// Constant term 1, so log and fractional powers exist.
fn unit_series() -> impl Strategy<Value = USeries> {
    series().prop_map(|mut s| {
        s.set_coeff(0, TPoly::one());
        s
    })
}

fn operator_series() -> impl Strategy<Value = OperatorSeries> {
    prop::collection::vec(prop::collection::vec(-2i64..=2, 9), ORDER).prop_map(|mats| {
        let mut coeffs = vec![PolyMatrix::zeros(3, 3)];
        coeffs.extend(mats.into_iter().map(|m| PolyMatrix::from_fn(3, 3, |i, j| TPoly::from_ints(&[m[3 * i + j]]))));
        OperatorSeries::from_coeffs(coeffs, ORDER).unwrap()
    })
}

/// Random spanning tree plus random chords, so the graph is connected.
fn connected_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n)
        .prop_flat_map(|n| {
            let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
            (Just(n), parents, prop::collection::vec((0..n, 0..n), 0..2 * n))
        })
        .prop_map(|(n, parents, chords)| {
            let mut edges: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
            for (a, b) in chords {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.iter().any(|&(x, y)| (x.min(y), x.max(y)) == e) {
                    edges.push(e);
                }
            }
            build_graph(n, &edges).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn series_ring_laws(a in series(), b in series(), c in series()) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a + &b) - &b, a);
    }

    #[test]
    fn exp_log_round_trip(a in unit_series()) {
        prop_assert_eq!(a.log().unwrap().exp().unwrap(), a);
    }

    #[test]
    fn log_turns_products_into_sums(a in unit_series(), b in unit_series()) {
        prop_assert_eq!((&a * &b).log().unwrap(), &a.log().unwrap() + &b.log().unwrap());
    }

    #[test]
    fn operator_exp_log_round_trip(x in operator_series()) {
        let e = x.exp().unwrap();
        prop_assert_eq!(e.log().unwrap(), x);
    }

    #[test]
    fn rational_powers_add(a in unit_series(), p in -5i64..=5, q in -5i64..=5, d in 1i64..=4) {
        let (x, y) = (rat(p, d), rat(q, d));
        let lhs = &a.pow_rational(&x).unwrap() * &a.pow_rational(&y).unwrap();
        prop_assert_eq!(lhs, a.pow_rational(&(x + y)).unwrap());
        prop_assert_eq!(a.pow_rational(&int(2)).unwrap(), &a * &a);
        prop_assert_eq!(a.pow_rational(&int(-1)).unwrap(), a.inverse().unwrap());
    }

    #[test]
    fn truncation_commutes_with_products(a in series(), b in series(), k in 0..=ORDER) {
        prop_assert_eq!((&a * &b).truncate(k), &a.truncate(k) * &b.truncate(k));
    }

    #[test]
    fn evaluation_is_a_ring_map(a in series(), b in series(), t in -1.0f64..1.0, u in -0.5f64..0.5) {
        let lhs = (&a * &b).truncate(ORDER).evaluate(t, u);
        // the product is truncated at u^ORDER, so compare against the truncated numeric product
        let (ca, cb) = (a.coefficients_at(t), b.coefficients_at(t));
        let mut rhs = 0.0;
        for i in 0..=ORDER {
            for j in 0..=ORDER - i {
                rhs += ca[i] * cb[j] * u.powi((i + j) as i32);
            }
        }
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn laplacian_is_positive_semidefinite(g in connected_graph(9), f in prop::collection::vec(-3.0f64..3.0, 9)) {
        let n = g.vertex_count();
        let f = &f[..n];
        let lap = g.laplacian_f64();
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| f[i] * lap[(i, j)] * f[j]).sum::<f64>()).sum();
        let edges: f64 = g.undirected_edges().iter().map(|&(a, b)| (f[a] - f[b]).powi(2)).sum();
        prop_assert!(quad >= -1e-12);
        prop_assert!((quad - edges).abs() < 1e-9);
    }

    #[test]
    fn cm_is_symmetric(g in connected_graph(7)) {
        let seq = cm_sequence(&g, 6);
        for m in 0..=6 {
            prop_assert_eq!(seq.get(m).transpose(), seq.get(m).clone());
        }
    }

    #[test]
    fn numeric_cm_matches_exact(g in connected_graph(7), t in -1.0f64..1.0) {
        let seq = cm_sequence(&g, 6);
        let num = cm_sequence_numeric(&g, t, 6);
        for m in 0..=6 {
            let exact = seq.get(m).evaluate(t);
            prop_assert!((&exact - &num[m]).amax() < 1e-9 * (1.0 + exact.amax()));
        }
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial(g in connected_graph(10)) {
        let n = g.vertex_count();
        let (eig, _) = symmetric_eigen(g.laplacian_f64()).unwrap();
        prop_assert_eq!(eig.len(), n);
        let char_poly = faddeev_leverrier(&g);
        // elementary symmetric functions of the eigenvalues against exact coefficients
        // |∂e_k/∂λ_i| ≤ e_{k-1}(|λ|), so eigenvalue errors of size ε·λ_max move e_k by at most ε·λ_max·e_{k-1}(|λ|)
        let mut e = vec![0.0; n + 1];
        let mut scale = vec![0.0; n + 1];
        e[0] = 1.0;
        scale[0] = 1.0;
        for &l in &eig {
            for k in (1..=n).rev() {
                e[k] -= l * e[k - 1];
                scale[k] += l.abs() * scale[k - 1];
            }
        }
        let lmax = eig.iter().fold(1.0f64, |m, l| m.max(l.abs()));
        for k in 0..=n {
            let tol = 1e-10 * (scale[k] + if k > 0 { lmax * scale[k - 1] } else { 0.0 }).max(1.0);
            let c = char_poly[k].to_f64().unwrap();
            prop_assert!((e[k] - c).abs() <= tol, "k = {} numeric {} exact {}", k, e[k], c);
        }
        prop_assert!(eig[0].abs() < 1e-10);
        prop_assert!(eig.windows(2).all(|w| w[0] <= w[1]));
    }
}

/// Exact coefficients of `det(xI − Δ)`, highest degree first.
fn faddeev_leverrier(g: &Graph) -> Vec<Rational> {
    let n = g.vertex_count();
    let lap = g.laplacian_f64();
    let a: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| int(lap[(i, j)].round() as i64)).collect()).collect();
    let mul = |x: &Vec<Vec<Rational>>, y: &Vec<Vec<Rational>>| -> Vec<Vec<Rational>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).fold(Rational::zero(), |acc, k| acc + &x[i][k] * &y[k][j])).collect())
            .collect()
    };
    let mut coeffs = vec![int(1)];
    let mut m: Vec<Vec<Rational>> = vec![vec![Rational::zero(); n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I, c_k = -tr(A M_k) / k
        let mut next = mul(&a, &m);
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += &coeffs[k - 1];
        }
        m = next;
        let am = mul(&a, &m);
        let trace = (0..n).fold(Rational::zero(), |acc, i| acc + &am[i][i]);
        coeffs.push(-trace / int(k as i64));
    }
    coeffs
}
