//! Closed-form eigenvalue estimates and their verdicts against computed data.
//!
//! Every checker is pure: identical inputs produce an identical
//! [`BoundReport`]. Applicability mirrors each statement's hypotheses (the
//! field-strength threshold for the Lichnerowicz-type bound, a closed
//! potential for the Buser-type bounds). Checks that consume a heuristic
//! Cheeger upper bound carry a soundness note saying which direction the
//! approximation can err.

use serde::Serialize;

/// Absolute slack added to one-sided comparisons so that quantities that are
/// analytically zero but numerically ~1e-13 do not flip verdicts.
const ABS_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TheoremId {
    #[serde(rename = "Lichnerowicz-1.1")]
    Lichnerowicz,
    #[serde(rename = "Buser-k-1.2")]
    BuserK,
    #[serde(rename = "Buser-1.3")]
    Buser1,
    #[serde(rename = "Cheeger-2.5a")]
    Cheeger25a,
    #[serde(rename = "Cheeger-2.5b-report-only")]
    Cheeger25bReportOnly,
    #[serde(rename = "HigherBuser-6.2")]
    HigherBuser,
    #[serde(rename = "Shigekawa")]
    Shigekawa,
    #[serde(rename = "QuadraticIneq-5")]
    QuadraticIneq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub theorem: TheoremId,
    pub inputs: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed slack; nonnegative iff the checked inequality holds.
    pub margin: f64,
    pub verdict: Verdict,
    pub soundness: String,
    pub tolerances: serde_json::Value,
    pub model_descriptor: String,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LichnerowiczBounds {
    pub a_minus: f64,
    pub a_plus: f64,
    pub gap: f64,
    pub applicable: bool,
}

/// a_{+/-}(K, ||d alpha||_inf, n) and the spectral-gap width; applicable iff
/// ||d alpha||_inf <= K / (1 + 2 sqrt((n-1)/n)).
pub fn lichnerowicz_bounds(k_ric: f64, dsup: f64, n: usize) -> LichnerowiczBounds {
    let nf = n as f64;
    let ratio = (nf - 1.0) / nf;
    let applicable = n >= 2 && k_ric > 0.0 && dsup <= k_ric / (1.0 + 2.0 * ratio.sqrt());
    let disc = (k_ric - dsup).powi(2) - 4.0 * ratio * dsup * dsup;
    if !applicable {
        return LichnerowiczBounds { a_minus: f64::NAN, a_plus: f64::NAN, gap: f64::NAN, applicable };
    }
    let root = disc.max(0.0).sqrt();
    let a_minus = nf * ((k_ric - dsup) - root) / (2.0 * (nf - 1.0));
    let a_plus = nf * ((k_ric - dsup) + root) / (2.0 * (nf - 1.0));
    let gap = nf / (nf - 1.0) * root;
    LichnerowiczBounds { a_minus, a_plus, gap, applicable }
}

/// lambda_1 <= a_-, lambda_2 >= a_+, and the gap, at relative tolerance
/// `tol_rel`.
pub fn check_lichnerowicz(
    eigenvalues: &[f64],
    k_ric: f64,
    dsup: f64,
    n: usize,
    tol_rel: f64,
    model: &str,
) -> BoundReport {
    let bounds = lichnerowicz_bounds(k_ric, dsup, n);
    let inputs = serde_json::json!({
        "K": k_ric, "dsup": dsup, "n": n,
        "lambda": eigenvalues.get(..2.min(eigenvalues.len())),
        "a_minus": bounds.a_minus, "a_plus": bounds.a_plus, "gap": bounds.gap,
    });
    let tolerances = serde_json::json!({ "tol_rel": tol_rel, "abs_slack": ABS_SLACK });
    if !bounds.applicable || eigenvalues.len() < 2 {
        return BoundReport {
            theorem: TheoremId::Lichnerowicz,
            inputs,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            verdict: Verdict::NotApplicable,
            soundness: "hypothesis ||d alpha|| <= K/(1+2 sqrt((n-1)/n)) fails or spectrum too short"
                .into(),
            tolerances,
            model_descriptor: model.into(),
        };
    }
    let (l1, l2) = (eigenvalues[0], eigenvalues[1]);
    let m_upper = bounds.a_minus * (1.0 + tol_rel) + ABS_SLACK - l1;
    let m_lower = l2 - bounds.a_plus * (1.0 - tol_rel);
    let m_gap = (l2 - l1) - bounds.gap * (1.0 - tol_rel);
    let margin = m_upper.min(m_lower).min(m_gap);
    BoundReport {
        theorem: TheoremId::Lichnerowicz,
        inputs,
        lhs: l1,
        rhs: bounds.a_minus,
        margin,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "two-sided: lambda_1 <= a_-, lambda_2 >= a_+, gap >= stated; \
                    discrete eigenvalues carry O(h^2) error absorbed by tol_rel"
            .into(),
        tolerances,
        model_descriptor: model.into(),
    }
}

/// (1 - 1/n) lambda_1^2 - (K - dsup) lambda_1 + dsup^2 >= 0.
pub fn check_quadratic_inequality(
    lambda1: f64,
    k_ric: f64,
    dsup: f64,
    n: usize,
    tol: f64,
    model: &str,
) -> BoundReport {
    let nf = n as f64;
    let value = (1.0 - 1.0 / nf) * lambda1 * lambda1 - (k_ric - dsup) * lambda1 + dsup * dsup;
    let floor = -tol * k_ric * k_ric;
    let margin = value - floor;
    BoundReport {
        theorem: TheoremId::QuadraticIneq,
        inputs: serde_json::json!({ "lambda1": lambda1, "K": k_ric, "dsup": dsup, "n": n }),
        lhs: value,
        rhs: floor,
        margin,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "direct substitution of the computed lambda_1".into(),
        tolerances: serde_json::json!({ "tol": tol }),
        model_descriptor: model.into(),
    }
}

/// Geometric default grid for the time parameter: within (0, 1/(2K)] when
/// K > 0, spanning [1e-3, 1e3] when K = 0.
pub fn default_t_grid(k_ric: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = if k_ric > 0.0 {
        let hi = 1.0 / (2.0 * k_ric);
        (hi * 1e-6, hi)
    } else {
        (1e-3, 1e3)
    };
    let n = points.max(2);
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// 2 sqrt(t) h_k >= 1/k - e^{-t lambda_k} for every t in the grid.
///
/// Requires d alpha = 0; t beyond 1/(2K) is outside the hypothesis and is
/// dropped from the check (kept in the report inputs).
pub fn check_buser_k(
    lambda_k: f64,
    h_k: f64,
    k_ric: f64,
    k: usize,
    dsup: f64,
    t_grid: &[f64],
    tol_abs: f64,
    model: &str,
) -> BoundReport {
    let tolerances = serde_json::json!({ "tol_abs": tol_abs, "dsup_threshold": 1e-9 });
    let admissible: Vec<f64> = t_grid
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && (k_ric <= 0.0 || t <= 1.0 / (2.0 * k_ric)))
        .collect();
    let inputs = serde_json::json!({
        "lambda_k": lambda_k, "h_k": h_k, "K": k_ric, "k": k, "dsup": dsup,
        "t_grid": t_grid, "t_checked": admissible,
    });
    if dsup > 1e-9 || admissible.is_empty() {
        return BoundReport {
            theorem: TheoremId::BuserK,
            inputs,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
            verdict: Verdict::NotApplicable,
            soundness: "hypothesis d alpha = 0 fails or no admissible t".into(),
            tolerances,
            model_descriptor: model.into(),
        };
    }
    let kf = k as f64;
    let mut worst = (f64::INFINITY, 0.0, 0.0);
    for &t in &admissible {
        let lhs = 2.0 * t.sqrt() * h_k;
        let rhs = 1.0 / kf - (-t * lambda_k).exp();
        let margin = lhs - rhs + tol_abs;
        if margin < worst.0 {
            worst = (margin, lhs, rhs);
        }
    }
    BoundReport {
        theorem: TheoremId::BuserK,
        inputs,
        lhs: worst.1,
        rhs: worst.2,
        margin: worst.0,
        verdict: if worst.0 >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "h_k is an upper bound on the true constant, so the left side is \
                    overestimated: a violation is genuine, a pass is evidence"
            .into(),
        tolerances,
        model_descriptor: model.into(),
    }
}

/// max{4 sqrt(2K) h_1, (4 e^2/(e-1)^2) h_1^2}.
pub fn buser1_upper(k_ric: f64, h1: f64) -> f64 {
    let e = std::f64::consts::E;
    let c = 4.0 * e * e / ((e - 1.0) * (e - 1.0));
    (4.0 * (2.0 * k_ric).sqrt() * h1).max(c * h1 * h1)
}

/// lambda_1 <= max{4 sqrt(2K) h_1, (4 e^2/(e-1)^2) h_1^2}.
pub fn check_buser1(
    lambda1: f64,
    h1: f64,
    k_ric: f64,
    dsup: f64,
    tol_rel: f64,
    model: &str,
) -> BoundReport {
    let rhs = buser1_upper(k_ric, h1);
    let inputs = serde_json::json!({ "lambda1": lambda1, "h1": h1, "K": k_ric, "dsup": dsup });
    let tolerances = serde_json::json!({ "tol_rel": tol_rel, "abs_slack": ABS_SLACK });
    if dsup > 1e-9 {
        return BoundReport {
            theorem: TheoremId::Buser1,
            inputs,
            lhs: lambda1,
            rhs,
            margin: f64::NAN,
            verdict: Verdict::NotApplicable,
            soundness: "hypothesis d alpha = 0 fails".into(),
            tolerances,
            model_descriptor: model.into(),
        };
    }
    let margin = rhs * (1.0 + tol_rel) + ABS_SLACK - lambda1;
    BoundReport {
        theorem: TheoremId::Buser1,
        inputs,
        lhs: lambda1,
        rhs,
        margin,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "right side uses the upper bound h_1-hat >= h_1, so a failure is genuine"
            .into(),
        tolerances,
        model_descriptor: model.into(),
    }
}

/// 2 log(2k) max{K, 2 k^2 h_k^2}.
pub fn higher_buser_upper(k_ric: f64, k: usize, h_k: f64) -> f64 {
    let kf = k as f64;
    2.0 * (2.0 * kf).ln() * k_ric.max(2.0 * kf * kf * h_k * h_k)
}

/// lambda_k <= 2 log(2k) max{K, 2 k^2 h_k^2}.
pub fn check_higher_buser(
    lambda_k: f64,
    h_k: f64,
    k_ric: f64,
    k: usize,
    dsup: f64,
    tol_rel: f64,
    model: &str,
) -> BoundReport {
    let rhs = higher_buser_upper(k_ric, k, h_k);
    let inputs =
        serde_json::json!({ "lambda_k": lambda_k, "h_k": h_k, "K": k_ric, "k": k, "dsup": dsup });
    let tolerances = serde_json::json!({ "tol_rel": tol_rel, "abs_slack": ABS_SLACK });
    if dsup > 1e-9 {
        return BoundReport {
            theorem: TheoremId::HigherBuser,
            inputs,
            lhs: lambda_k,
            rhs,
            margin: f64::NAN,
            verdict: Verdict::NotApplicable,
            soundness: "hypothesis d alpha = 0 fails".into(),
            tolerances,
            model_descriptor: model.into(),
        };
    }
    let margin = rhs * (1.0 + tol_rel) + ABS_SLACK - lambda_k;
    BoundReport {
        theorem: TheoremId::HigherBuser,
        inputs,
        lhs: lambda_k,
        rhs,
        margin,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "right side uses the upper bound h_k-hat >= h_k, so a failure is genuine"
            .into(),
        tolerances,
        model_descriptor: model.into(),
    }
}

/// h_1 <= 2 sqrt(2 lambda_1), checkable only where the h_1 estimate is known
/// near-exact (the circle closed-form regime); otherwise report-only.
pub fn check_cheeger_inequality(
    lambda1: f64,
    h1: f64,
    near_exact: bool,
    tol_rel: f64,
    model: &str,
) -> BoundReport {
    let rhs = 2.0 * (2.0 * lambda1.max(0.0)).sqrt();
    let inputs = serde_json::json!({ "lambda1": lambda1, "h1": h1, "near_exact": near_exact });
    let tolerances = serde_json::json!({ "tol_rel": tol_rel, "abs_slack": ABS_SLACK });
    if !near_exact {
        return BoundReport {
            theorem: TheoremId::Cheeger25a,
            inputs,
            lhs: h1,
            rhs,
            margin: f64::NAN,
            verdict: Verdict::NotApplicable,
            soundness: "report-only: an upper bound on h_1 cannot falsify h_1 <= 2 sqrt(2 lambda_1)"
                .into(),
            tolerances,
            model_descriptor: model.into(),
        };
    }
    let margin = rhs * (1.0 + tol_rel) + ABS_SLACK - h1;
    BoundReport {
        theorem: TheoremId::Cheeger25a,
        inputs,
        lhs: h1,
        rhs,
        margin,
        verdict: if margin >= 0.0 { Verdict::Holds } else { Verdict::Violated },
        soundness: "h_1 estimate flagged near-exact on this instance".into(),
        tolerances,
        model_descriptor: model.into(),
    }
}

/// Reported ratio h_k / (k^3 sqrt(lambda_k)); the absolute constant is not
/// specified, so this is never a verdict.
pub fn cheeger_25b_report(lambda_k: f64, h_k: f64, k: usize, model: &str) -> BoundReport {
    let kf = k as f64;
    let denom = kf.powi(3) * lambda_k.max(0.0).sqrt();
    let ratio = if denom > 0.0 { h_k / denom } else { f64::NAN };
    BoundReport {
        theorem: TheoremId::Cheeger25bReportOnly,
        inputs: serde_json::json!({ "lambda_k": lambda_k, "h_k": h_k, "k": k, "ratio": ratio }),
        lhs: h_k,
        rhs: denom,
        margin: f64::NAN,
        verdict: Verdict::NotApplicable,
        soundness: "report-only: the absolute constant C is unspecified".into(),
        tolerances: serde_json::json!({}),
        model_descriptor: model.into(),
    }
}

/// Gauge triviality must coincide with a vanishing smallest eigenvalue.
pub fn check_shigekawa(trivial: bool, lambda1: f64, tol: f64, model: &str) -> BoundReport {
    let consistent = if trivial { lambda1 <= tol } else { lambda1 > tol };
    let margin = if trivial { tol - lambda1 } else { lambda1 - tol };
    BoundReport {
        theorem: TheoremId::Shigekawa,
        inputs: serde_json::json!({ "gauge_trivial": trivial, "lambda1": lambda1 }),
        lhs: lambda1,
        rhs: tol,
        margin,
        verdict: if consistent { Verdict::Holds } else { Verdict::Violated },
        soundness: "equivalence checked in both directions at the stated tolerance".into(),
        tolerances: serde_json::json!({ "tol": tol }),
        model_descriptor: model.into(),
    }
}

/// Default relative tolerance for spectral comparisons (discretization error).
pub const DEFAULT_TOL_REL: f64 = 0.02;
/// Default absolute tolerance for the heat-kernel Buser check.
pub const DEFAULT_TOL_ABS: f64 = 1e-6;
