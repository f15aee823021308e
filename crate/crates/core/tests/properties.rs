use proptest::prelude::*;
use vprop_core::grid::Grid;
use vprop_core::oracle::mvprop_fixed_point;
use vprop_core::planners::mvprop_rollout;
use vprop_core::tensor::{ConvSpec, DiffArray, Tape};

fn unit(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv2d_is_linear_in_its_input(x in unit(2 * 4 * 5), w in unit(3 * 2 * 9), a in -2.0..2.0f64) {
        let spec = ConvSpec::same3x3(2, 3);
        let mut tape = Tape::<f64>::new();
        let xv = tape.constant(vec![2, 4, 5], x.clone()).unwrap();
        let ax = tape.constant(vec![2, 4, 5], x.iter().map(|v| a * v).collect()).unwrap();
        let wv = tape.constant(spec.weight_shape(), w).unwrap();
        let y = tape.conv2d(xv, wv, None, spec).unwrap();
        let ay = tape.conv2d(ax, wv, None, spec).unwrap();
        for (p, q) in tape.value(y).iter().zip(tape.value(ay)) {
            prop_assert!((a * p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn log_softmax_normalises(x in prop::collection::vec(-20.0..20.0f64, 1..12)) {
        let mut tape = Tape::<f64>::new();
        let n = x.len();
        let v = tape.constant(vec![n], x).unwrap();
        let l = tape.log_softmax(v).unwrap();
        let total: f64 = tape.value(l).iter().map(|z| z.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_max_routes_unit_gradient_per_cell(x in unit(4 * 3 * 3)) {
        let mut tape = Tape::<f64>::new();
        let v = tape.leaf(&DiffArray::param(vec![4, 3, 3], x).unwrap());
        let m = tape.channel_max(v).unwrap();
        let loss = tape.weighted_sum(m, &[1.0; 9]).unwrap();
        let g = tape.backward(loss).unwrap();
        let grad = g.get(v).unwrap();
        for cell in 0..9 {
            let s: f64 = (0..4).map(|c| grad[c * 9 + cell]).sum();
            prop_assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn mvprop_values_grow_with_depth_and_stay_below_max_reward(r in unit(16), p in unit(16), k in 1usize..8) {
        let run = |depth| {
            let mut tape = Tape::<f64>::new();
            let rv = tape.constant(vec![4, 4], r.clone()).unwrap();
            let pv = tape.constant(vec![4, 4], p.clone()).unwrap();
            let v = mvprop_rollout(&mut tape, rv, pv, depth).unwrap();
            tape.value(v).to_vec()
        };
        let (short, long) = (run(k), run(k + 1));
        let top = r.iter().copied().fold(0.0, f64::max);
        for ((a, b), ri) in short.iter().zip(&long).zip(&r) {
            prop_assert!(b >= a);
            prop_assert!(a >= ri);
            prop_assert!(*b <= top + 1e-12);
        }
    }

    #[test]
    fn mvprop_rollout_reaches_the_fixed_point(r in unit(20), p in unit(20)) {
        let mut tape = Tape::<f64>::new();
        let rv = tape.constant(vec![4, 5], r.clone()).unwrap();
        let pv = tape.constant(vec![4, 5], p.clone()).unwrap();
        let v = mvprop_rollout(&mut tape, rv, pv, 20).unwrap();
        let oracle = mvprop_fixed_point(&Grid::from_vec(5, 4, r).unwrap(), &Grid::from_vec(5, 4, p).unwrap()).unwrap();
        for (a, b) in tape.value(v).iter().zip(oracle.as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
