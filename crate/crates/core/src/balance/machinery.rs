//! Transform identities behind the characterisation of `ψ`-balance.
//!
//! With `(S, T) = ψ(A, B)` and `σ, θ < 0` define
//! `x_s = E A^s e^{ασA+θ/A}`, `y_s = E B^s e^{σB+βθ/B}`,
//! `u_s = E S^s e^{αθS+σ/S}`, `v_s = E T^s e^{θT+βσ/T}`.
//! Independence of `(A, B)` and of `(S, T)` gives `x_{-s} y_s = u_{-s} v_s`.
//! Each transform also has a Bessel closed form, known up to a factor that
//! depends on `s` only; those are compared through ratios over `(σ, θ)`.

use super::{BalanceSpec, PairLaws, Variant};
use crate::dist::{ExtLaplaceArgs, GigParams, LawSampler, MarginalLaw};
use crate::error::{Error, Result};
use crate::maps::{psi, PositivePair};
use crate::report::CheckRow;
use crate::rng;
use crate::specfun::bessel_k_log;
use crate::stats::mean_se;
use rand_distr::Distribution;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformEstimate {
    pub name: String,
    pub monte_carlo: f64,
    pub std_error: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachineryRecord {
    pub s: f64,
    pub sigma: f64,
    pub theta: f64,
    pub seed: u64,
    pub n: usize,
    pub transforms: Vec<TransformEstimate>,
    pub trick2_lhs: f64,
    pub trick2_rhs: f64,
    /// `(x̂ŷ − ûv̂) / ûv̂` from two independent sample sets.
    pub trick2_relative: f64,
    pub trick2_relative_se: f64,
    pub rows: Vec<CheckRow>,
    pub pass: bool,
}

fn gig(law: &MarginalLaw) -> Result<GigParams> {
    match law {
        MarginalLaw::Gig(g) => Ok(*g),
        _ => Err(Error::domain(
            "machinery check needs alpha, beta > 0 (proper GIG laws)",
        )),
    }
}

/// `ln` of `(p/q)^{ν/2} K_ν(2√(c·p·q))`.
fn bessel_form(p: f64, q: f64, nu: f64, c: f64) -> Result<f64> {
    Ok(0.5 * nu * (p / q).ln() + bessel_k_log(nu, 2.0 * (c * p * q).sqrt())?)
}

/// Runs the checks at `(s, σ, θ)` with `n` draws per sample set.
pub fn machinery_check(
    spec: &BalanceSpec,
    s: f64,
    sigma: f64,
    theta: f64,
    seed: u64,
    n: usize,
) -> Result<MachineryRecord> {
    if spec.variant != Variant::ScalarPsi {
        return Err(Error::domain("machinery check applies to the psi variant"));
    }
    if !(sigma < 0.0 && theta < 0.0 && s.is_finite()) {
        return Err(Error::domain(format!(
            "need sigma, theta < 0 and finite s, got ({s}, {sigma}, {theta})"
        )));
    }
    if n < 2 {
        return Err(Error::domain("need at least 2 draws"));
    }
    let (al, be, lam, c1, c2) = (spec.map.alpha, spec.map.beta, spec.lambda, spec.c1, spec.c2);
    let (PairLaws::Scalar(inp), PairLaws::Scalar(out)) = (spec.input_laws()?, spec.output_laws()?)
    else {
        unreachable!("scalar variant")
    };
    let (a_law, b_law, s_law, t_law) = (gig(&inp[0])?, gig(&inp[1])?, gig(&out[0])?, gig(&out[1])?);

    let fx = move |a: f64| a.powf(-s) * (al * sigma * a + theta / a).exp();
    let fy = move |b: f64| b.powf(s) * (sigma * b + be * theta / b).exp();
    let fu = move |x: f64| x.powf(-s) * (al * theta * x + sigma / x).exp();
    let fv = move |t: f64| t.powf(s) * (theta * t + be * sigma / t).exp();
    let analytic_at = |sg: f64, th: f64| -> Result<[f64; 4]> {
        Ok([
            a_law.ext_laplace_log(ExtLaplaceArgs::new(-s, al * sg, th))?,
            b_law.ext_laplace_log(ExtLaplaceArgs::new(s, sg, be * th))?,
            s_law.ext_laplace_log(ExtLaplaceArgs::new(-s, al * th, sg))?,
            t_law.ext_laplace_log(ExtLaplaceArgs::new(s, th, be * sg))?,
        ])
    };

    // streams 0, 1: (A, B) for x, y; streams 2, 3: an independent (A, B) mapped to (S, T)
    let draw = |law: &MarginalLaw, k: u64| -> Result<Vec<f64>> {
        Ok(LawSampler::new(law)?
            .sample_iter(rng::stream(seed, k))
            .take(n)
            .collect())
    };
    let (a1, b1) = (draw(&inp[0], 0)?, draw(&inp[1], 1)?);
    let (a2, b2) = (draw(&inp[0], 2)?, draw(&inp[1], 3)?);
    let (st_s, st_t): (Vec<f64>, Vec<f64>) = a2
        .iter()
        .zip(&b2)
        .map(|(&a, &b)| psi(spec.map, PositivePair::raw(a, b)))
        .map(|p| (p.first, p.second))
        .unzip();
    let est = [
        mean_se(&a1.iter().map(|&a| fx(a)).collect::<Vec<_>>()),
        mean_se(&b1.iter().map(|&b| fy(b)).collect::<Vec<_>>()),
        mean_se(&st_s.iter().map(|&x| fu(x)).collect::<Vec<_>>()),
        mean_se(&st_t.iter().map(|&t| fv(t)).collect::<Vec<_>>()),
    ];
    let exact = analytic_at(sigma, theta)?;
    let names = ["x_minus_s", "y_s", "u_minus_s", "v_s"];
    let transforms: Vec<TransformEstimate> = names
        .iter()
        .zip(est.iter().zip(&exact))
        .map(|(nm, (&(m, se), &e))| TransformEstimate {
            name: (*nm).into(),
            monte_carlo: m,
            std_error: se,
            analytic: e.exp(),
        })
        .collect();

    let mut rows = Vec::new();
    for t in &transforms {
        let z = (t.monte_carlo - t.analytic).abs() / t.std_error;
        rows.push(CheckRow::at_most(
            format!("{}_mc_vs_analytic_z", t.name),
            z,
            4.0,
        ));
    }
    let lhs = est[0].0 * est[1].0;
    let rhs = est[2].0 * est[3].0;
    let rel = (lhs - rhs) / rhs;
    let rel_se = est
        .iter()
        .map(|(m, se)| (se / m).powi(2))
        .sum::<f64>()
        .sqrt();
    rows.push(CheckRow::at_most("trick2_mc_z", rel.abs() / rel_se, 4.0));
    rows.push(CheckRow::at_most(
        "trick2_analytic",
        ((exact[0] + exact[1]) - (exact[2] + exact[3])).abs(),
        1e-8,
    ));

    // closed forms with (σ₀, θ₀) = (c₁, c₂) and orders λ+s, −λ−s, as ratios
    // over (σ, θ) so the s-dependent constants cancel
    let closed_at = |sg: f64, th: f64| -> Result<[f64; 4]> {
        let (ds, dt) = (c1 - sg, c2 - th);
        Ok([
            bessel_form(dt, ds, -lam - s, al)?,
            bessel_form(dt, ds, lam + s, be)?,
            bessel_form(ds, dt, -lam - s, al)?,
            bessel_form(ds, dt, lam + s, be)?,
        ])
    };
    let base_a = analytic_at(sigma, theta)?;
    let base_c = closed_at(sigma, theta)?;
    let mut worst = [0.0f64; 4];
    for (sg, th) in [
        (2.0 * sigma, theta),
        (sigma, 2.0 * theta),
        (0.5 * sigma, 3.0 * theta),
        (3.0 * sigma, 0.25 * theta),
    ] {
        let (an, cl) = (analytic_at(sg, th)?, closed_at(sg, th)?);
        for k in 0..4 {
            let gap = ((an[k] - base_a[k]) - (cl[k] - base_c[k])).exp_m1().abs();
            worst[k] = worst[k].max(gap);
        }
    }
    for (nm, w) in names.iter().zip(worst) {
        rows.push(CheckRow::at_most(
            format!("{nm}_closed_form_ratio"),
            w,
            1e-8,
        ));
    }
    let pass = crate::report::all_pass(&rows);
    Ok(MachineryRecord {
        s,
        sigma,
        theta,
        seed,
        n,
        transforms,
        trick2_lhs: lhs,
        trick2_rhs: rhs,
        trick2_relative: rel,
        trick2_relative_se: rel_se,
        rows,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_point() {
        let spec = BalanceSpec::scalar_psi(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        let r = machinery_check(&spec, 0.7, -1.0, -0.5, 11, 200_000).unwrap();
        assert!(r.pass, "{:#?}", r.rows);
    }

    #[test]
    fn unit_limit() {
        let spec = BalanceSpec::scalar_psi(0.5, 3.0, 1.0, 3.0, -1.0).unwrap();
        let r = machinery_check(&spec, 0.0, -1e-12, -1e-12, 2, 1_000).unwrap();
        for t in &r.transforms {
            assert!(
                (t.analytic - 1.0).abs() < 1e-9 && (t.monte_carlo - 1.0).abs() < 1e-9,
                "{t:?}"
            );
        }
        assert!(r.trick2_relative.abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        let spec = BalanceSpec::scalar_psi(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        assert!(machinery_check(&spec, 0.7, 1.0, -0.5, 1, 100).is_err());
        let fdk = BalanceSpec::scalar_fdk(1.0, 2.0, 1.0, 1.0, 0.5).unwrap();
        assert!(machinery_check(&fdk, 0.7, -1.0, -0.5, 1, 100).is_err());
    }
}
