use hum_core::carleman::{closed_nodes, quadratic_form, sigma_min, WeightParams};
use hum_core::control::{Gramian, Observation};
use hum_core::forward::{ForwardCoefficients, ForwardSolver};
use hum_core::random::{complex_normal, gaussian_level, normal_vec, stream};
use hum_core::tree::martingale_representation;
use hum_core::{FiltrationTree, Grid, LevelField, NormKind, TimeScheme, C64};
use proptest::prelude::*;

fn grid_for(dim2: bool, m: usize) -> Grid {
    if dim2 {
        Grid::new(&[(0.0, 1.0), (0.0, 1.5)], &[m, m + 1]).unwrap()
    } else {
        Grid::new(&[(0.0, 1.0)], &[m]).unwrap()
    }
}

fn solver(dim2: bool, m: usize, k: usize, seed: u64, cn: bool) -> ForwardSolver {
    let g = grid_for(dim2, m);
    let t = FiltrationTree::new(1.0, k).unwrap();
    let c = ForwardCoefficients::random(&mut stream(seed, 0), &g, &t, 1.0);
    let x0: Vec<f64> = if dim2 { vec![-0.4, -0.7] } else { vec![-1.0] };
    let scheme = if cn { TimeScheme::crank_nicolson(3) } else { TimeScheme::IMPLICIT_EULER };
    ForwardSolver::new(&g, &t, c, g.gamma0(&x0).unwrap(), scheme).unwrap()
}

fn close(a: C64, b: C64, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hm1_and_h10_are_dual(m in 2usize..7, dim2 in any::<bool>(), seed in any::<u64>()) {
        let g = grid_for(dim2, m);
        let u = normal_vec(&mut stream(seed, 1), g.len());
        // |(-Δ)u|_{H⁻¹} = |u|_{H¹₀}
        let r = g.hm1_riesz(&u).unwrap();
        let a = g.norm_sqr(&r, NormKind::Hm1).unwrap();
        let b = g.norm_sqr(&u, NormKind::H10).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn normal_trace_adjoint_identity(m in 2usize..7, dim2 in any::<bool>(), seed in any::<u64>()) {
        let g = grid_for(dim2, m);
        let mut rng = stream(seed, 2);
        let u = normal_vec(&mut rng, g.len());
        let b = normal_vec(&mut rng, g.face_nodes().len());
        let lhs = g.boundary_inner(&b, &g.normal_trace(&u).unwrap(), None);
        let rhs = g.inner(&g.normal_trace_adjoint(&b).unwrap(), &u);
        prop_assert!(close(lhs, rhs, lhs.norm() + 1.0, 1e-12));
    }

    #[test]
    fn gamma0_obeys_sign_rule(m in 2usize..6, x in -3.0f64..-0.01, y in -3.0f64..4.0) {
        let g = grid_for(true, m);
        let gamma = g.gamma0(&[x, y]).unwrap();
        for (f, face) in g.face_nodes().iter().enumerate() {
            let dot = (face.coord[0] - x) * face.normal[0] + (face.coord[1] - y) * face.normal[1];
            prop_assert_eq!(gamma.contains(f), dot > 0.0);
        }
    }

    #[test]
    fn tower_property(k in 1usize..6, seed in any::<u64>()) {
        let t = FiltrationTree::new(1.0, k).unwrap();
        let f = gaussian_level(&mut stream(seed, 3), k, 3);
        let mut cur = f.clone();
        while cur.level() > 0 {
            cur = t.conditional_expectation(&cur).unwrap();
        }
        let direct = t.expectation(&f).unwrap();
        for (a, b) in cur.node(0).iter().zip(direct.iter()) {
            prop_assert!(close(*a, *b, b.norm() + 1.0, 1e-13));
        }
    }

    #[test]
    fn martingale_split_reconstructs_children(seed in any::<u64>(), dt in 1e-3f64..1.0) {
        let mut rng = stream(seed, 4);
        let plus = normal_vec(&mut rng, 4);
        let minus = normal_vec(&mut rng, 4);
        let (mean, z) = martingale_representation(&plus, &minus, dt);
        for i in 0..4 {
            prop_assert!(close(mean[i] + z[i] * dt.sqrt(), plus[i], plus[i].norm() + 1.0, 1e-13));
            prop_assert!(close(mean[i] - z[i] * dt.sqrt(), minus[i], minus[i].norm() + 1.0, 1e-13));
        }
    }

    #[test]
    fn backward_solve_is_linear(m in 2usize..5, k in 1usize..4, seed in any::<u64>(), cn in any::<bool>()) {
        let s = solver(false, m, k, seed, cn);
        let mut rng = stream(seed, 5);
        let a = gaussian_level(&mut rng, k, m);
        let b = gaussian_level(&mut rng, k, m);
        let (alpha, beta) = (complex_normal(&mut rng), complex_normal(&mut rng));
        let mut combo = a.clone();
        combo.scale(alpha);
        combo.axpy(beta, &b);
        let sa = s.backward().solve(&a).unwrap();
        let sb = s.backward().solve(&b).unwrap();
        let sc = s.backward().solve(&combo).unwrap();
        let mut expect = sa.z.clone();
        expect.scale(alpha);
        expect.axpy(beta, &sb.z);
        let scale = sc.z.levels().iter().flat_map(|l| l.data()).map(|v| v.norm()).fold(0.0, f64::max);
        for (x, y) in sc.z.levels().iter().zip(expect.levels()) {
            for (p, q) in x.data().iter().zip(y.data()) {
                prop_assert!(close(*p, *q, scale, 1e-12));
            }
        }
    }

    #[test]
    fn deterministic_problems_have_no_martingale_part(m in 2usize..6, k in 1usize..5, seed in any::<u64>()) {
        let g = grid_for(false, m);
        let t = FiltrationTree::new(1.0, k).unwrap();
        let mut rng = stream(seed, 6);
        let c = ForwardCoefficients {
            ca: vec![hum_core::CoefField::Spatial(hum_core::random::smooth_field(&mut rng, &g, 1.0, true))],
            a2: hum_core::CoefField::Spatial(hum_core::random::smooth_field(&mut rng, &g, 1.0, false)),
            a3: hum_core::CoefField::Spatial(hum_core::random::smooth_field(&mut rng, &g, 1.0, false)),
        };
        let s = ForwardSolver::new(&g, &t, c, g.gamma0(&[-1.0]).unwrap(), TimeScheme::IMPLICIT_EULER).unwrap();
        let datum = LevelField::deterministic(k, &normal_vec(&mut rng, m));
        let sol = s.backward().solve(&datum).unwrap();
        prop_assert!(sol.big_z.is_zero());
    }

    #[test]
    fn duality_identity_holds(dim2 in any::<bool>(), k in 1usize..4, seed in any::<u64>(), cn in any::<bool>()) {
        let s = solver(dim2, 3, k, seed, cn);
        let n = s.grid().len();
        let faces = s.grid().face_nodes().len();
        let mut rng = stream(seed, 7);
        let y0 = normal_vec(&mut rng, n);
        let mut controls = s.zero_controls();
        for lvl in 0..k {
            for (i, v) in controls.u.level_mut(lvl).data_mut().iter_mut().enumerate() {
                if s.gamma0().contains(i % faces) {
                    *v = complex_normal(&mut rng);
                }
            }
            *controls.g.level_mut(lvl) = gaussian_level(&mut rng, lvl, n);
        }
        let state = s.solve(&y0, &controls, None, k).unwrap();
        let z = gaussian_level(&mut rng, k, n);
        let check = s.duality_gap(&state, &y0, &controls, None, &z).unwrap();
        prop_assert!(check.gap <= 1e-12, "gap {}", check.gap);
    }

    #[test]
    fn gramian_is_hermitian_and_nonnegative(k in 1usize..4, seed in any::<u64>()) {
        let gr = Gramian::new(solver(false, 4, k, seed, true), Observation::BOTH).unwrap();
        let mut rng = stream(seed, 8);
        let a = gaussian_level(&mut rng, k, 4);
        let b = gaussian_level(&mut rng, k, 4);
        let la = gr.apply(&a).unwrap();
        let lb = gr.apply(&b).unwrap();
        let ab = gr.pairing(&la, &b);
        let ba = gr.pairing(&lb, &a).conj();
        prop_assert!(close(ab, ba, ab.norm() + ba.norm(), 1e-12));
        let aa = gr.pairing(&la, &a);
        prop_assert!(aa.re >= 0.0 && aa.im.abs() <= 1e-12 * aa.re.max(1e-300));
    }

    #[test]
    fn psi_respects_five_sixths_rule(m in 2usize..9, x0 in -5.0f64..-0.01, extra in 0.0f64..3.0) {
        let g = grid_for(false, m);
        let sigma = sigma_min(&g.extents(), &[x0]).unwrap() + extra;
        let p = WeightParams::new(&g.extents(), &[x0], Some(sigma), 1.0, 1.0, 1.0).unwrap();
        for node in closed_nodes(&g) {
            prop_assert!(6.0 * p.psi(&node[..1]) >= 5.0 * p.psi_max());
        }
    }

    #[test]
    fn theta_never_exceeds_one(t in 0.001f64..0.999, x in 0.0f64..1.0, s in 0.01f64..50.0, lambda in 0.01f64..5.0) {
        let p = WeightParams::new(&[(0.0, 1.0)], &[-1.0], None, s, lambda, 1.0).unwrap();
        let w = p.weights(t, &[x]).unwrap();
        prop_assert!(w.log_theta < 0.0);
    }

    #[test]
    fn carleman_quadratic_form_bound_2d(seed in any::<u64>(), t in 0.05f64..0.95, s in 0.1f64..5.0, lambda in 0.05f64..1.5) {
        let p = WeightParams::new(&[(0.0, 1.0), (0.0, 1.0)], &[-0.5, -0.25], None, s, lambda, 1.0).unwrap();
        let mut rng = stream(seed, 9);
        let x = [rand::Rng::random_range(&mut rng, 0.0..1.0), rand::Rng::random_range(&mut rng, 0.0..1.0)];
        let c = p.coefficients(t, &x).unwrap();
        let v = normal_vec(&mut rng, 2);
        let bound = 64.0 * s * lambda * c.weights.phi() * (v[0].norm_sqr() + v[1].norm_sqr());
        prop_assert!(quadratic_form(&c.c_closed, &v) >= bound * (1.0 - 1e-14));
    }
}
