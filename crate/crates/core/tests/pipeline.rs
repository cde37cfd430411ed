use hfbeam::beam::Order;
use hfbeam::field::{Grid, WaveField};
use hfbeam::initial_data::{preset_initial_data, PresetParams};
use hfbeam::synthesis::{launch_families, propagate_family, superpose, SuperpositionConfig};
use hfbeam::MediumModel;

fn focus_field() -> WaveField<2> {
    let med = MediumModel::bump(0.2, 0.6, vec![0.2, -0.1]);
    let d = preset_initial_data::<2>("focus2d", &PresetParams::default()).unwrap();
    let eps = 0.05;
    let cfg = SuperpositionConfig::with_default_spacing(eps, 1.0, Order::Second, 2.9).unwrap();
    let mut fams = Vec::new();
    for f in launch_families(&d, &med, &cfg).unwrap() {
        fams.extend(propagate_family(&med, &f, &[0.6], 1e-8).unwrap());
    }
    superpose(&med, &fams, &cfg, &Grid::covering([-1.0, -1.0], [1.0, 1.0], eps / 8.0)).unwrap()
}

#[test]
fn result_is_independent_of_thread_count() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(focus_field);
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(focus_field);
    assert_eq!(one.u, four.u);
    assert_eq!(one.ut, four.ut);
    assert!(one.u.iter().any(|z| z.norm() > 0.1));
}
