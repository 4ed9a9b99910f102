use jcpot::adaptation::{barycentric_map, jcpot_lp, jcpot_pt, label_propagation, otda_baseline, Decoder, Prediction};
use jcpot::class_ops::build_class_operators;
use jcpot::datagen::{gen_multisource_scenario, ScenarioParams};
use jcpot::harness::metrics::{accuracy, mean_std};
use jcpot::ot::{Coupling, SinkhornParams};
use jcpot::{jcpot_fit, JcpotProblem, LabeledDataset};
use ndarray::{array, Array2};
use proptest::prelude::*;

/// (labels per domain, couplings, lambda) with a shared target of size n.
fn domains() -> impl Strategy<Value = (Vec<Vec<usize>>, Vec<Array2<f64>>, Vec<f64>)> {
    (1usize..4, 1usize..6, 2usize..4).prop_flat_map(|(k, n, c)| {
        let domain = (c..c + 6).prop_flat_map(move |rows| {
            let labels = proptest::collection::vec(0..c, rows).prop_map(move |mut l| {
                for (i, y) in l.iter_mut().take(c).enumerate() {
                    *y = i;
                }
                l
            });
            let plan = proptest::collection::vec(0.0f64..1.0, rows * n)
                .prop_map(move |v| Array2::from_shape_vec((rows, n), v).unwrap());
            (labels, plan)
        });
        let lambda = proptest::collection::vec(0.01f64..1.0, k).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        });
        (proptest::collection::vec(domain, k), lambda, Just(c)).prop_map(|(d, lambda, _)| {
            let (labels, plans) = d.into_iter().unzip();
            (labels, plans, lambda)
        })
    })
}

proptest! {
    #[test]
    fn label_propagation_is_linear((labels, plans, lambda) in domains()) {
        let c = labels.iter().flatten().max().unwrap() + 1;
        let ops: Vec<_> = labels.iter().map(|l| build_class_operators(l, c).unwrap()).collect();
        let couplings: Vec<_> = plans.iter().map(|p| Coupling::new(p.clone()).unwrap()).collect();
        let scores = label_propagation(&couplings, &ops, &lambda).unwrap();

        let mut expected = Array2::<f64>::zeros(scores.values().dim());
        for ((o, p), l) in ops.iter().zip(&plans).zip(&lambda) {
            expected = expected + o.d1().dot(p) * *l;
        }
        let raw = &scores.values() * &scores.column_norms().view().insert_axis(ndarray::Axis(0));
        for (j, col) in expected.columns().into_iter().enumerate() {
            let norm = scores.column_norms()[j];
            prop_assert!((col.sum() - norm).abs() <= 1e-12);
            if norm > 0.0 {
                prop_assert!((scores.values().column(j).sum() - 1.0).abs() <= 1e-9);
                for (a, b) in col.iter().zip(raw.column(j).iter()) {
                    prop_assert!((a - b).abs() <= 1e-12);
                }
            } else {
                prop_assert!(scores.unlabeled().contains(&j));
            }
        }

        // argmax is unchanged when every coupling is scaled by the same constant
        let scaled: Vec<_> = plans.iter().map(|p| Coupling::new(p * 37.5).unwrap()).collect();
        let again = label_propagation(&scaled, &ops, &lambda).unwrap();
        prop_assert_eq!(scores.argmax(), again.argmax());
    }

    #[test]
    fn barycenters_stay_in_target_box(
        plan in (1usize..5, 1usize..6).prop_flat_map(|(r, n)| proptest::collection::vec(0.0f64..1.0, r * n)
            .prop_map(move |v| Array2::from_shape_vec((r, n), v).unwrap())),
        seed in 0u64..100,
    ) {
        let n = plan.ncols();
        let target = Array2::from_shape_fn((n, 2), |(i, j)| ((seed + 7 * i as u64 + 3 * j as u64) % 11) as f64 - 5.0);
        let map = barycentric_map(&Coupling::new(plan.clone()).unwrap(), target.view()).unwrap();
        prop_assert_eq!(map.kept.len() + map.dropped.len(), plan.nrows());
        for p in map.points.rows() {
            for (d, &x) in p.iter().enumerate() {
                let col = target.column(d);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
            }
        }
    }
}

#[test]
fn product_coupling_maps_to_centroid() {
    let target = array![[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]];
    let g = Coupling::new(Array2::from_elem((4, 3), 1.0 / 12.0)).unwrap();
    let map = barycentric_map(&g, target.view()).unwrap();
    for p in map.points.rows() {
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
    }
}

#[test]
fn one_to_one_otda() {
    let src = LabeledDataset::new(array![[0.0, 0.0]], vec![0]).unwrap();
    let out = otda_baseline(&src, 1, array![[4.0, 1.0]].view(), &SinkhornParams::default()).unwrap();
    assert_eq!(out.lp.labels, vec![0]);
    assert_eq!(out.pt.labels, vec![0]);
}

#[test]
fn hard_labels_are_one_hot() {
    let p = Prediction::from_labels(vec![1, 0, 1], 2, Decoder::Nn).unwrap();
    assert_eq!(p.scores.values(), array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]);
    assert_eq!(p.scores.argmax(), p.labels);
    assert!(Prediction::from_labels(vec![2], 2, Decoder::Nn).is_err());
}

#[test]
fn pt_tracks_lp_on_separated_clusters() {
    let params = ScenarioParams {
        num_sources: 3,
        n_source: 200,
        n_target: 200,
        separation: 5.0,
        ..Default::default()
    };
    let mut lp = Vec::new();
    let mut pt = Vec::new();
    for seed in 0..5 {
        let s = gen_multisource_scenario(&params, seed).unwrap();
        let sol = jcpot_fit(&JcpotProblem::new(s.sources.clone(), s.target.clone(), 2)).unwrap();
        lp.push(accuracy(&jcpot_lp(&sol).unwrap().labels, &s.truth.labels).unwrap());
        pt.push(
            accuracy(
                &jcpot_pt(&sol, &s.sources, s.target.view()).unwrap().labels,
                &s.truth.labels,
            )
            .unwrap(),
        );
    }
    let (lp, _) = mean_std(&lp);
    let (pt, _) = mean_std(&pt);
    assert!((lp - pt).abs() <= 0.05, "LP {lp} vs PT {pt}");
}
