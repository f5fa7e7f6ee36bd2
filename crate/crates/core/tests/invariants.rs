use eprsim_core::criteria::{duan_sum, Orientation};
use eprsim_core::gaussian::{symplectic_form, GaussianState, Quadrature, SymplecticOp};
use eprsim_core::optics::{
    loss_on, nopa_source, pbs, phase_shift, rotate_fluctuations, PbsPorts, PumpPhase, SourceSpec,
    WavePlateSpec,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn source(r: f64, excess: f64, efficiency: f64, amp: bool) -> GaussianState {
    nopa_source(
        &SourceSpec {
            alpha: 30.0,
            r,
            pump_phase: if amp {
                PumpPhase::Amplification
            } else {
                PumpPhase::Deamplification
            },
            excess_noise: excess,
            efficiency,
        },
        "a",
        "b",
    )
    .unwrap()
}

fn sp_deviation(op: &SymplecticOp) -> f64 {
    let s = op.matrix();
    let omega = symplectic_form(op.modes());
    (s * &omega * s.transpose() - omega).amax()
}

fn det(op: &SymplecticOp) -> f64 {
    DMatrix::clone(op.matrix()).determinant()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn optical_elements_are_symplectic(angle in -720.0f64..720.0, theta in -20.0f64..20.0, eps in -1.6f64..1.6) {
        let ops = [
            WavePlateSpec::quarter(angle).op("x", "y").unwrap(),
            WavePlateSpec::half(angle).op("x", "y").unwrap(),
            phase_shift(&["x", "y"], theta).unwrap(),
            phase_shift(&["x"], theta).unwrap(),
            pbs(PbsPorts { inputs: ["p", "s", "u", "v"], outputs: ["c", "e", "f", "d"] }, eps).unwrap(),
        ];
        for op in &ops {
            prop_assert!(sp_deviation(op) < 1e-12);
            prop_assert!((det(op) - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn circuits_stay_physical(
        r in 0.0f64..2.5,
        excess in 0.0f64..0.5,
        eff in 0.05f64..=1.0,
        amp in any::<bool>(),
        q in 0.0f64..180.0,
        h in 0.0f64..180.0,
        theta in -7.0f64..7.0,
        eta in 0.0f64..=1.0,
    ) {
        let s = source(r, excess, eff, amp);
        prop_assert!(s.check_physicality().physical);
        let s = s.relabel("a", "x").unwrap().relabel("b", "y").unwrap();
        let s = s.apply(&WavePlateSpec::quarter(q).op("x", "y").unwrap()).unwrap();
        let s = rotate_fluctuations(&s, "y", theta).unwrap();
        let s = loss_on(&s, &["x"], eta).unwrap();
        let s = s.apply(&WavePlateSpec::half(h).op("x", "y").unwrap()).unwrap();
        let report = s.check_physicality();
        prop_assert!(report.min_symplectic_eigenvalue >= 1.0 - 1e-9, "{:?}", report);
    }

    #[test]
    fn variance_ignores_appended_vacuum(r in 0.0f64..3.0, w in proptest::array::uniform4(-2.0f64..2.0)) {
        let s = source(r, 0.0, 1.0, false);
        let terms = [
            ("a", Quadrature::X, w[0]),
            ("a", Quadrature::Y, w[1]),
            ("b", Quadrature::X, w[2]),
            ("b", Quadrature::Y, w[3]),
        ];
        let v = s.quadrature_variance(&s.coefficients(&terms).unwrap()).unwrap();
        let padded = s.with_vacuum("v1").unwrap().with_vacuum("v2").unwrap();
        let vp = padded.quadrature_variance(&padded.coefficients(&terms).unwrap()).unwrap();
        prop_assert!((v - vp).abs() <= 1e-12 * v.abs().max(1.0));
    }

    #[test]
    fn duan_total_monotone(r1 in 0.0f64..3.0, r2 in 0.0f64..3.0, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let total = |r: f64, eta: f64| {
            let s = loss_on(&source(r, 0.0, 1.0, false), &["a", "b"], eta).unwrap();
            duan_sum(&s, "a", "b", Orientation::SumDifference).unwrap().total
        };
        let (rl, rh) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let (el, eh) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        prop_assert!(total(rh, 1.0) <= total(rl, 1.0) + 1e-12);
        prop_assert!(total(rh, el) >= total(rh, eh) - 1e-12);
    }

    #[test]
    fn pure_sources_have_unit_spectrum(r in 0.0f64..3.0) {
        let rep = source(r, 0.0, 1.0, false).check_physicality();
        for nu in rep.symplectic_eigenvalues {
            prop_assert!((nu - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn four_quarter_wave_plates_are_identity() {
    let q = WavePlateSpec::quarter(0.0).op("x", "y").unwrap();
    let four = q.after(&q).unwrap().after(&q).unwrap().after(&q).unwrap();
    let id = DMatrix::<f64>::identity(4, 4);
    assert!((four.matrix() - id).amax() < 1e-12);
}
