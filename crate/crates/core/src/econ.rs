//! Incentive game between a data-buying company and a sharing user, and
//! back-of-envelope capacity figures for a committee with a fixed tps budget.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workload::Mixture;

pub const SECONDS_PER_YEAR: f64 = 31_536_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error("c_r must be positive (got {0})")]
    RewardCost(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error("{0} out of range")]
    Range(&'static str),
}

/// User side: non-monetary value `r_n`, monetary reward `r_m`, direct and
/// indirect sharing costs `c_d`, `c_i`. Company side: reward cost `c_r`,
/// fixed collection cost `c_f`, data value `b` times demand `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameParams {
    pub r_n: f64,
    pub r_m: f64,
    pub c_d: f64,
    pub c_i: f64,
    pub c_r: f64,
    pub c_f: f64,
    pub b: f64,
    pub d: f64,
}

impl GameParams {
    pub fn validate(&self) -> Result<(), EconError> {
        for (name, v) in [
            ("r_n", self.r_n),
            ("r_m", self.r_m),
            ("c_d", self.c_d),
            ("c_i", self.c_i),
            ("c_r", self.c_r),
            ("c_f", self.c_f),
            ("b", self.b),
            ("d", self.d),
        ] {
            if !v.is_finite() {
                return Err(EconError::NonFinite(name));
            }
        }
        if self.c_r <= 0.0 {
            return Err(EconError::RewardCost(self.c_r));
        }
        // A negative reward is a charge, which the tree does not model.
        if self.r_m < 0.0 {
            return Err(EconError::Range("r_m"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompanyAction {
    Rewards,
    NoRewards,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAction {
    Share,
    NotShare,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub company: CompanyAction,
    pub user: UserAction,
    pub company_utility: f64,
    pub user_utility: f64,
}

/// Leaf payoffs `(company, user)`.
pub fn utilities(p: &GameParams, company: CompanyAction, user: UserAction) -> (f64, f64) {
    use CompanyAction::*;
    use UserAction::*;
    match (company, user) {
        (Rewards, Share) => (p.b * p.d - p.c_r - p.c_f, p.r_m + p.r_n - p.c_d - p.c_i),
        (NoRewards, Share) => (p.b * p.d - p.c_f, p.r_n - p.c_d - p.c_i),
        (Rewards, NotShare) => (-p.c_r, 0.0),
        (NoRewards, NotShare) => (0.0, 0.0),
    }
}

/// The user shares only when that is strictly better than walking away.
pub fn user_best_response(p: &GameParams, company: CompanyAction) -> UserAction {
    if utilities(p, company, UserAction::Share).1 > 0.0 {
        UserAction::Share
    } else {
        UserAction::NotShare
    }
}

/// Backward induction; the company pays rewards only when strictly better off.
pub fn solve_game(p: &GameParams) -> Result<Equilibrium, EconError> {
    p.validate()?;
    let with = user_best_response(p, CompanyAction::Rewards);
    let without = user_best_response(p, CompanyAction::NoRewards);
    let (u_with, _) = utilities(p, CompanyAction::Rewards, with);
    let (u_without, _) = utilities(p, CompanyAction::NoRewards, without);
    let (company, user) =
        if u_with > u_without { (CompanyAction::Rewards, with) } else { (CompanyAction::NoRewards, without) };
    let (company_utility, user_utility) = utilities(p, company, user);
    Ok(Equilibrium { company, user, company_utility, user_utility })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacityParams {
    pub tps_capacity: f64,
    pub tx_size: u64,
    pub lbs_fraction: f64,
    pub daily_points_mean: f64,
    pub daily_points_sd: f64,
    pub mixture: Mixture,
    pub target_throughput: f64,
    /// Upper bound returned as `lbs_fraction` approaches zero.
    pub user_cap: u64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        CapacityParams {
            tps_capacity: 3500.0,
            tx_size: 134,
            lbs_fraction: 1.0,
            daily_points_mean: 3600.0,
            daily_points_sd: 950.0,
            mixture: Mixture::default(),
            target_throughput: 1.0,
            user_cap: 1_000_000_000,
        }
    }
}

impl CapacityParams {
    pub fn validate(&self) -> Result<(), EconError> {
        if !(self.tps_capacity > 0.0 && self.tps_capacity.is_finite()) {
            return Err(EconError::Range("tps_capacity"));
        }
        if self.tx_size == 0 {
            return Err(EconError::Range("tx_size"));
        }
        if !(self.lbs_fraction >= 0.0 && self.lbs_fraction <= 1.0) {
            return Err(EconError::Range("lbs_fraction"));
        }
        if !(self.target_throughput > 0.0 && self.target_throughput <= 1.0) {
            return Err(EconError::Range("target_throughput"));
        }
        if !(self.daily_points_mean > 0.0 && self.daily_points_mean.is_finite()) {
            return Err(EconError::Range("daily_points_mean"));
        }
        self.mixture.validate().map_err(|_| EconError::Range("mixture"))
    }
}

/// Maximum of the mixture density over the day (per hour) and where it occurs.
pub fn peak_density(mixture: &Mixture) -> (f64, f64) {
    let steps = 24 * 600;
    let mut best = (0.0, f64::MIN);
    for i in 0..steps {
        let t = 24.0 * i as f64 / steps as f64;
        let d = mixture.density(t);
        if d > best.1 {
            best = (t, d);
        }
    }
    // Golden-section refinement inside the winning grid cell's neighbourhood.
    let (mut lo, mut hi) = (best.0 - 24.0 / steps as f64, best.0 + 24.0 / steps as f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if mixture.density(a) < mixture.density(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let t = (lo + hi) / 2.0;
    (t.rem_euclid(24.0), mixture.density(t).max(best.1))
}

/// Transactions per second one user emits at the daily peak.
pub fn peak_per_user_rate(p: &CapacityParams) -> f64 {
    p.daily_points_mean * peak_density(&p.mixture).1 / 3600.0
}

pub fn max_users(p: &CapacityParams) -> Result<u64, EconError> {
    p.validate()?;
    let effective = p.tps_capacity / p.target_throughput;
    let demand = p.lbs_fraction * peak_per_user_rate(p);
    if demand <= 0.0 {
        return Ok(p.user_cap);
    }
    let users = (effective / demand).floor();
    Ok(if users >= p.user_cap as f64 { p.user_cap } else { users as u64 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Growth {
    pub bytes_per_s: f64,
    pub bytes_per_year: f64,
}

impl Growth {
    pub fn mb_per_s(&self) -> f64 {
        self.bytes_per_s / 1e6
    }

    pub fn tb_per_year(&self) -> f64 {
        self.bytes_per_year / 1e12
    }

    pub fn tib_per_year(&self) -> f64 {
        self.bytes_per_year / (1u64 << 40) as f64
    }
}

pub fn ledger_growth(tps: f64, tx_size: u64) -> Growth {
    let bytes_per_s = tps * tx_size as f64;
    Growth { bytes_per_s, bytes_per_year: bytes_per_s * SECONDS_PER_YEAR }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UsersRow {
    pub lbs_fraction: f64,
    pub users_at_90: u64,
    pub users_at_100: u64,
    pub reference_at_90: u64,
    pub reference_at_100: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub tps: f64,
    pub tx_size: u64,
    pub mb_per_s: f64,
    pub tb_per_year: f64,
    pub tib_per_year: f64,
    /// Users served at 75% LBS adoption and 90% peak throughput.
    pub users: u64,
    pub reference_tb_per_year: f64,
    pub reference_users: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityTables {
    pub users: Vec<UsersRow>,
    pub growth: Vec<GrowthRow>,
}

/// Reference figures: (lbs fraction, users at 90%, users at 100%).
pub const REFERENCE_USERS: [(f64, u64, u64); 4] =
    [(1.0, 60_000, 48_000), (0.75, 76_000, 72_000), (0.5, 115_000, 108_000), (0.25, 230_000, 216_000)];

/// Reference figures: (tps, TB per year, users).
pub const REFERENCE_GROWTH: [(f64, f64, u64); 4] =
    [(3500.0, 13.8, 76_000), (7000.0, 27.6, 152_000), (10_500.0, 41.4, 228_000), (14_000.0, 55.2, 304_000)];

pub fn capacity_table(base: &CapacityParams) -> Result<CapacityTables, EconError> {
    let mut users = Vec::new();
    for (lbs, r90, r100) in REFERENCE_USERS {
        let at = |thr: f64| max_users(&CapacityParams { lbs_fraction: lbs, target_throughput: thr, ..base.clone() });
        users.push(UsersRow {
            lbs_fraction: lbs,
            users_at_90: at(0.9)?,
            users_at_100: at(1.0)?,
            reference_at_90: r90,
            reference_at_100: r100,
        });
    }
    let mut growth = Vec::new();
    for (tps, tb, ref_users) in REFERENCE_GROWTH {
        let g = ledger_growth(tps, base.tx_size);
        let u = max_users(&CapacityParams {
            tps_capacity: tps,
            lbs_fraction: 0.75,
            target_throughput: 0.9,
            ..base.clone()
        })?;
        growth.push(GrowthRow {
            tps,
            tx_size: base.tx_size,
            mb_per_s: g.mb_per_s(),
            tb_per_year: g.tb_per_year(),
            tib_per_year: g.tib_per_year(),
            users: u,
            reference_tb_per_year: tb,
            reference_users: ref_users,
        });
    }
    Ok(CapacityTables { users, growth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(r_n: f64, r_m: f64, c_d: f64, c_i: f64, c_r: f64, c_f: f64, bd: f64) -> GameParams {
        GameParams { r_n, r_m, c_d, c_i, c_r, c_f, b: bd, d: 1.0 }
    }

    #[test]
    fn free_service_regime() {
        for r_m in [0.0, 3.0, 100.0] {
            let e = solve_game(&params(5.0, r_m, 1.0, 2.0, 1.0, 0.0, 10.0)).unwrap();
            assert_eq!((e.company, e.user), (CompanyAction::NoRewards, UserAction::Share));
            assert_eq!(e.user_utility, 2.0);
        }
    }

    #[test]
    fn paid_regime() {
        // B·D − c_r − c_f = 4
        let e = solve_game(&params(1.0, 6.0, 2.0, 3.0, 1.0, 1.0, 6.0)).unwrap();
        assert_eq!((e.company, e.user), (CompanyAction::Rewards, UserAction::Share));
        assert_eq!(e.company_utility, 4.0);
    }

    #[test]
    fn zero_branch() {
        let e = solve_game(&params(0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)).unwrap();
        assert_eq!((e.company, e.user, e.company_utility, e.user_utility), (CompanyAction::NoRewards, UserAction::NotShare, 0.0, 0.0));
        assert_eq!(solve_game(&params(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)), Err(EconError::RewardCost(0.0)));
    }

    #[test]
    fn growth_and_users() {
        let g = ledger_growth(3500.0, 134);
        assert_eq!(g.bytes_per_s, 469_000.0);
        assert!((g.tb_per_year() - 14.790_384).abs() < 1e-6);
        let base = CapacityParams::default();
        let u100 = max_users(&base).unwrap();
        let u90 = max_users(&CapacityParams { target_throughput: 0.9, ..base.clone() }).unwrap();
        assert!((u100 as f64 - 48_000.0).abs() / 48_000.0 < 0.15, "{u100}");
        assert!((u90 as f64 - 60_000.0).abs() / 60_000.0 < 0.15, "{u90}");
        assert_eq!(max_users(&CapacityParams { lbs_fraction: 0.0, ..base }).unwrap(), 1_000_000_000);
    }

    #[test]
    fn peak_is_the_morning_or_evening_mode() {
        let (t, d) = peak_density(&Mixture::default());
        assert!((t - 8.0).abs() < 1.0 || (t - 18.0).abs() < 1.0, "{t}");
        for i in 0..2400 {
            assert!(Mixture::default().density(i as f64 / 100.0) <= d + 1e-15);
        }
    }
}
