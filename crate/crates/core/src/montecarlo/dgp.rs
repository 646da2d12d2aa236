use serde::Serialize;

use crate::dataset::ColumnTable;
use crate::numerics::{std_normal_cdf, RngStream};

/// True cumulative effect of always versus never treated under
/// [`simulate_dataset`], for every `(gamma, theta)`.
pub const TRUE_CTE: f64 = 0.5;

/// Two-period data with a latent common cause `u` of the post-treatment
/// confounder and the outcome.
///
/// ```text
/// u, c1 ~ N(0, 1)
/// a1 ~ Bernoulli(Φ(γ c1))
/// c2 ~ N(0.5 u + 0.5 c1 + 0.5 a1, 1)
/// a2 ~ Bernoulli(Φ(γ c1 + 0.5 a1 + γ c2))
/// y  ~ N(0.5 u + γ c1 + a1 (0.2 + θ c1) + γ r2
///        + a2 (0.2 + 0.1 a1 + θ (c1 + r2)), 1),   r2 = c2 − 0.5 c1 − 0.5 a1
/// ```
///
/// `r2` centers `c2` on its mean given `(c1, a1)` with `u` marginalized, so
/// every moderation term has mean zero and the cumulative effect is
/// 0.2 + 0.2 + 0.1 regardless of γ and θ.
pub fn simulate_dataset(gamma: f64, theta: f64, n: usize, stream: &mut RngStream) -> ColumnTable {
    let u: Vec<f64> = (0..n).map(|_| stream.normal(0.0, 1.0)).collect();
    let c1: Vec<f64> = (0..n).map(|_| stream.normal(0.0, 1.0)).collect();
    let a1: Vec<f64> = c1
        .iter()
        .map(|&c| stream.bernoulli(std_normal_cdf(gamma * c)))
        .collect();
    let c2: Vec<f64> = (0..n)
        .map(|i| stream.normal(0.5 * u[i] + 0.5 * c1[i] + 0.5 * a1[i], 1.0))
        .collect();
    let a2: Vec<f64> = (0..n)
        .map(|i| stream.bernoulli(std_normal_cdf(gamma * c1[i] + 0.5 * a1[i] + gamma * c2[i])))
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let r2 = c2[i] - (0.5 * c1[i] + 0.5 * a1[i]);
            let mean = 0.5 * u[i]
                + gamma * c1[i]
                + a1[i] * (0.2 + theta * c1[i])
                + gamma * r2
                + a2[i] * (0.2 + 0.1 * a1[i] + theta * (c1[i] + r2));
            stream.normal(mean, 1.0)
        })
        .collect();
    ColumnTable::from_columns([
        ("u", u),
        ("c1", c1),
        ("a1", a1),
        ("c2", c2),
        ("a2", a2),
        ("y", y),
    ])
    .expect("generated columns have equal length")
}

/// Treatment-effect moderation strengths for the mediation generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moderation {
    /// Coefficient on `d·x`.
    pub treatment_by_x: f64,
    /// Coefficient on `m·x`.
    pub mediator_by_x: f64,
    /// Coefficient on `m·(z − E[z | x, d])`.
    pub mediator_by_z: f64,
}

impl Moderation {
    pub const NONE: Moderation = Moderation {
        treatment_by_x: 0.0,
        mediator_by_x: 0.0,
        mediator_by_z: 0.0,
    };

    pub const DEFAULT: Moderation = Moderation {
        treatment_by_x: 0.4,
        mediator_by_x: 0.3,
        mediator_by_z: 0.3,
    };
}

/// Linear structural coefficients for the mediation generator:
///
/// ```text
/// x ~ N(0, 1),  l ~ N(0, 1) unobserved
/// d ~ Bernoulli(Φ(d_intercept + d_on_x·x))
/// z = z_on_d·d + z_on_x·x + z_on_l·l + N(0, 1)
/// m = m_intercept + m_on_d·d + m_on_x·x + m_on_z·z + N(0, 1)
/// y = y_on_d·d + y_on_x·x + y_on_z·z + (y_on_m + y_on_dm·d)·m + y_on_l·l
///     + moderation terms + N(0, 1)
/// ```
///
/// `l` confounds `z` and `y` only, so treatment and mediator assignment are
/// ignorable given the observed past.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediationParams {
    pub d_intercept: f64,
    pub d_on_x: f64,
    pub z_on_d: f64,
    pub z_on_x: f64,
    pub z_on_l: f64,
    pub m_intercept: f64,
    pub m_on_d: f64,
    pub m_on_x: f64,
    pub m_on_z: f64,
    pub y_on_d: f64,
    pub y_on_x: f64,
    pub y_on_z: f64,
    pub y_on_m: f64,
    pub y_on_dm: f64,
    pub y_on_l: f64,
    pub moderation: Moderation,
}

impl Default for MediationParams {
    fn default() -> Self {
        Self {
            d_intercept: -0.5,
            d_on_x: 0.8,
            z_on_d: 0.4,
            z_on_x: 0.3,
            z_on_l: 0.5,
            m_intercept: 0.0,
            m_on_d: 0.3,
            m_on_x: 0.2,
            m_on_z: 0.5,
            y_on_d: 0.1,
            y_on_x: 0.3,
            y_on_z: 0.25,
            y_on_m: 0.2,
            y_on_dm: 0.1,
            y_on_l: 0.5,
            moderation: Moderation::NONE,
        }
    }
}

impl MediationParams {
    /// Every structural coefficient zero: no effects anywhere.
    pub fn null() -> Self {
        Self {
            d_intercept: 0.0,
            d_on_x: 0.0,
            z_on_d: 0.0,
            z_on_x: 0.0,
            z_on_l: 0.0,
            m_intercept: 0.0,
            m_on_d: 0.0,
            m_on_x: 0.0,
            m_on_z: 0.0,
            y_on_d: 0.0,
            y_on_x: 0.0,
            y_on_z: 0.0,
            y_on_m: 0.0,
            y_on_dm: 0.0,
            y_on_l: 0.0,
            moderation: Moderation::NONE,
        }
    }

    pub fn with_moderation(mut self, moderation: Moderation) -> Self {
        self.moderation = moderation;
        self
    }

    /// `E[Y(1, m) − Y(0, m)]`. The moderation terms are products with
    /// mean-zero variables that do not depend on `d`, so they drop out.
    pub fn true_cde(&self, m: f64) -> f64 {
        self.y_on_d + self.y_on_z * self.z_on_d + self.y_on_dm * m
    }

    /// `E[Y(1, M(1)) − Y(0, M(0))]`.
    pub fn true_total_effect(&self) -> f64 {
        let mediator_shift = self.m_on_d + self.m_on_z * self.z_on_d;
        let mediator_mean_treated = self.m_intercept + mediator_shift;
        self.y_on_d
            + self.y_on_z * self.z_on_d
            + self.y_on_m * mediator_shift
            + self.y_on_dm * mediator_mean_treated
    }
}

/// Columns `x, d, z, m, y`.
pub fn simulate_mediation_dataset(
    params: &MediationParams,
    n: usize,
    stream: &mut RngStream,
) -> ColumnTable {
    let p = params;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for c in cols.iter_mut() {
        c.reserve(n);
    }
    for _ in 0..n {
        let x = stream.normal(0.0, 1.0);
        let l = stream.normal(0.0, 1.0);
        let d = stream.bernoulli(std_normal_cdf(p.d_intercept + p.d_on_x * x));
        let z_resid = p.z_on_l * l + stream.normal(0.0, 1.0);
        let z = p.z_on_d * d + p.z_on_x * x + z_resid;
        let m =
            p.m_intercept + p.m_on_d * d + p.m_on_x * x + p.m_on_z * z + stream.normal(0.0, 1.0);
        let mean = p.y_on_d * d
            + p.y_on_x * x
            + p.y_on_z * z
            + (p.y_on_m + p.y_on_dm * d) * m
            + p.y_on_l * l
            + p.moderation.treatment_by_x * d * x
            + p.moderation.mediator_by_x * m * x
            + p.moderation.mediator_by_z * m * z_resid;
        let y = stream.normal(mean, 1.0);
        for (c, v) in cols.iter_mut().zip([x, d, z, m, y]) {
            c.push(v);
        }
    }
    ColumnTable::from_columns(["x", "d", "z", "m", "y"].into_iter().zip(cols))
        .expect("generated columns have equal length")
}
