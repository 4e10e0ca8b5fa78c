//! Property tests for the structural invariants: exact continued-fraction
//! algebra, determinant-one steps, reality of trigonometric polynomials,
//! the cocycle composition law, and symplecticity of dual steps.

use proptest::prelude::*;

use qplab_core::arithmetic::{cf_expand, Frequency};
use qplab_core::cocycles::{iterate, schrodinger_step, CocycleSpec, TrigPolynomial};
use qplab_core::duality::{dual_step, SymplecticForm};
use qplab_core::numeric::frac;
use qplab_core::C64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cf_determinant_identity_rational(p in 1u64..5000, q in 2u64..5000) {
        prop_assume!(p < q);
        let alpha = Frequency::rational(p, q).unwrap();
        let cf = cf_expand(&alpha, 64).unwrap();
        prop_assert!(cf.determinant_identity_holds());
    }

    #[test]
    fn cf_determinant_identity_sampled(x in 1e-4f64..0.9999) {
        let alpha = Frequency::irrational(x).unwrap();
        let cf = cf_expand(&alpha, 24).unwrap();
        prop_assert!(cf.determinant_identity_holds());
    }

    #[test]
    fn two_sided_divisor_bound_sampled(x in 0.01f64..0.99) {
        let alpha = Frequency::irrational(x).unwrap();
        let cf = cf_expand(&alpha, 18).unwrap();
        let usable = (cf.trustworthy_terms() + 1).min(cf.len());
        for n in 1..usable.saturating_sub(1) {
            let (Some(qn), Some(qn1)) = (cf.q_u64(n), cf.q_u64(n + 1)) else { break };
            if qn1 > 1_000_000 {
                break;
            }
            let dist = alpha.torus_norm_multiple(qn as i64);
            prop_assert!(dist >= 1.0 / (2.0 * qn1 as f64) - 1e-13);
            prop_assert!(dist <= 1.0 / qn1 as f64 + 1e-13);
        }
    }

    #[test]
    fn schrodinger_step_has_unit_determinant(
        lambda in -2.0f64..2.0,
        e in -4.0f64..4.0,
        x in 0.0f64..1.0,
        eps in -0.4f64..0.4,
    ) {
        let v = TrigPolynomial::cosine(lambda);
        let s = schrodinger_step(&v, c(e, 0.0), x, eps).unwrap();
        let det = s[(0, 0)] * s[(1, 1)] - s[(0, 1)] * s[(1, 0)];
        prop_assert!((det - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn trig_polynomial_is_real_on_the_axis(
        a_re in -2.0f64..2.0,
        a_im in -2.0f64..2.0,
        b_re in -2.0f64..2.0,
        b_im in -2.0f64..2.0,
        x in 0.0f64..1.0,
    ) {
        prop_assume!(b_re.abs() + b_im.abs() > 0.05);
        let coeffs = vec![
            c(b_re, -b_im),
            c(a_re, -a_im),
            c(0.3, 0.0),
            c(a_re, a_im),
            c(b_re, b_im),
        ];
        let v = TrigPolynomial::from_coeffs(coeffs, 1.0).unwrap();
        let val = v.eval(x, 0.0);
        prop_assert!(val.im.abs() < 1e-12 * (1.0 + val.re.abs()));
    }

    #[test]
    fn cocycle_composition_law(
        a in 1i64..40,
        b in 1i64..40,
        x0 in 0.0f64..1.0,
        lambda in 0.1f64..1.5,
    ) {
        let v = TrigPolynomial::cosine(lambda);
        let spec = CocycleSpec::schrodinger(v, c(0.4, 0.0), Frequency::golden(), 0.0).unwrap();
        let whole = iterate(&spec, x0, a + b).unwrap();
        let first = iterate(&spec, x0, b).unwrap();
        let second = iterate(&spec, frac(x0 + b as f64 * spec.rotation()), a).unwrap();
        let composed = second * first;
        let rel = (&whole - &composed).norm() / whole.norm().max(1.0);
        prop_assert!(rel < 1e-10, "relative deviation {rel:.3e}");
    }

    #[test]
    fn dual_steps_are_symplectic(
        a_re in -1.0f64..1.0,
        a_im in -1.0f64..1.0,
        lead in 0.3f64..1.0,
        e in -3.0f64..3.0,
        theta in 0.0f64..1.0,
    ) {
        let coeffs = vec![
            c(lead, 0.0),
            c(a_re, -a_im),
            c(0.1, 0.0),
            c(a_re, a_im),
            c(lead, 0.0),
        ];
        let v = TrigPolynomial::from_coeffs(coeffs, 1.0).unwrap();
        let w = TrigPolynomial::cosine(1.0);
        let m = dual_step(&v, &w, c(e, 0.0), theta, 0.0).unwrap();
        let form = SymplecticForm::from_potential(&v).unwrap();
        prop_assert!(form.defect(&m).unwrap() <= 1e-12);
    }
}
