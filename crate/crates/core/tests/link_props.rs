use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_xmedia::alloc::SlotWeights;
use ris_xmedia::channel::draw_channel_set;
use ris_xmedia::config::SystemConfig;
use ris_xmedia::link::*;

fn small_config(n: usize, m: usize, power_dbm: f64) -> SystemConfig {
    SystemConfig {
        ris_elements: n,
        ap_antennas: m,
        power_dbm,
        ..SystemConfig::default()
    }
}

fn random_disk_phase(rng: &mut ChaCha8Rng, n: usize) -> PhaseVector {
    let v = DVector::from_fn(n, |_, _| Complex64::from_polar(rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..6.3)));
    PhaseVector::relaxed(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmse_identities(seed in any::<u64>(), n in 1usize..6, m in 1usize..5, p in 0.0f64..40.0) {
        let cfg = small_config(n, m, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel_set(&cfg, &mut rng).unwrap();
        let model = LinkModel::new(&cfg, &ch).unwrap();
        let phi = random_disk_phase(&mut rng, n);
        let bf = model.beamformers(&phi).unwrap();
        let e = model.mses(&phi, &bf).unwrap();
        for (k, label) in TermLabel::ALL.into_iter().enumerate() {
            let g = model.sinr(&phi, label.link()).unwrap();
            prop_assert!((e[k] - 1.0 / (1.0 + g)).abs() <= 1e-10);
            if let Link::Down(_) = label.link() {
                prop_assert!(g < 1.0 / cfg.rho_si);
            }
        }
    }

    #[test]
    fn forms_are_hermitian_psd_and_real(seed in any::<u64>(), n in 1usize..6, t1 in 0.01f64..0.99) {
        let cfg = small_config(n, 3, 23.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel_set(&cfg, &mut rng).unwrap();
        let model = LinkModel::new(&cfg, &ch).unwrap();
        let phi = random_disk_phase(&mut rng, n);
        let bf = model.beamformers(&phi).unwrap();
        let mu = model.aux_weights(&phi, &bf).unwrap();
        for f in model.quad_forms(&bf, &mu, SlotWeights::new(t1, 1.0 - t1)).unwrap() {
            prop_assert!(f.is_hermitian(1e-12));
            prop_assert!(f.check_psd().is_ok());
            let x = random_disk_phase(&mut rng, n);
            let q: Complex64 = x.entries().dotc(&(&f.b * x.entries()));
            prop_assert!(q.im.abs() <= 1e-9 * q.re.abs().max(1.0));
            prop_assert!(q.re >= -1e-9 * f.curvature_bound().max(1.0));
        }
    }

    #[test]
    fn doubling_slot_doubles_terms(seed in any::<u64>(), t1 in 0.05f64..0.45) {
        let cfg = small_config(3, 2, 23.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel_set(&cfg, &mut rng).unwrap();
        let model = LinkModel::new(&cfg, &ch).unwrap();
        let phi = PhaseVector::ones(3);
        let bf = model.beamformers(&phi).unwrap();
        let mu = model.aux_weights(&phi, &bf).unwrap();
        let t2 = 1.0 - t1;
        let a = model.quad_forms(&bf, &mu, SlotWeights::new(t1, t2)).unwrap();
        let b = model.quad_forms(&bf, &mu, SlotWeights::new(2.0 * t1, t2)).unwrap();
        // T1 multiplies the 2U and 1D terms.
        for k in [1, 2] {
            prop_assert!((b[k].c - 2.0 * a[k].c).abs() <= 1e-9 * a[k].c.abs().max(1.0));
            prop_assert!((&b[k].b - &a[k].b * Complex64::new(2.0, 0.0)).norm() <= 1e-9 * a[k].b.norm().max(1.0));
        }
        for k in [0, 3] {
            prop_assert_eq!(&a[k], &b[k]);
        }
    }
}

#[test]
fn cascade_matches_entrywise_sum() {
    let cfg = small_config(2, 4, 23.0);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let ch = draw_channel_set(&cfg, &mut rng).unwrap();
        let model = LinkModel::new(&cfg, &ch).unwrap();
        let phi = random_disk_phase(&mut rng, 2);
        for d in Device::ALL {
            let dev = &ch.devices[d.index()];
            let p = cfg.derived_powers().tx[d.index()];
            let got = model.cascade_uplink(&phi, d).unwrap();
            for m in 0..4 {
                let mut want = Complex64::new(0.0, 0.0);
                for n in 0..2 {
                    want += dev.ris_ap[(m, n)] * phi.entries()[n] * dev.h_ris[n] * p.sqrt();
                }
                assert!((got[m] - want).norm() <= 1e-12 * want.norm().max(1e-300));
            }
        }
    }
}

#[test]
fn mmse_beats_random_beamformers() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let h = DVector::from_fn(4, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let noise = 0.3;
        let best = uplink_sinr_with(&mmse_uplink(&h, noise), &h, noise);
        for _ in 0..100 {
            let w = DVector::from_fn(4, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let w = &w / Complex64::new(w.norm(), 0.0);
            assert!(uplink_sinr_with(&w, &h, noise) <= best * (1.0 + 1e-12));
        }
    }
}

#[test]
fn mu_times_e_is_one() {
    for e in [1e-6, 0.01, 0.5, 0.999, 1.0] {
        let mu = optimal_weight(e).unwrap();
        assert!((mu * e - 1.0).abs() < 1e-15);
    }
}
