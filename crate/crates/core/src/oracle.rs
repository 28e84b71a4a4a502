//! Brute-force verification over every regime path.
//!
//! Paths carry exact weights computed straight from the intensities, cash
//! flows and stopping rules are replayed per path, and every conditional
//! expectation is a weighted average over paths sharing a prefix. Nothing
//! here goes through the event partitions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capital::{expected_shortfall, CapitalProfile, EsConvention};
use crate::error::{Error, Result};
use crate::fair::ZERO_TOL;
use crate::hedge::{Stopping, TraderType};
use crate::model::Model;
use crate::par::Exec;
use crate::regime::{binary_price_unchecked, MarketSpec, Regime, RegimePath};
use crate::trader::{TraderCalib, TraderSurface};
use crate::xva::XvaLedger;

pub const PATH_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPath {
    /// Bit `l-1` set iff the regime flips over `(l-1, l]`.
    pub flips: u64,
    pub path: RegimePath,
    pub weight: f64,
}

fn flip_prob(gamma: f64) -> f64 {
    (1.0 - (-2.0 * gamma).exp()) / 2.0
}

pub fn enumerate_paths(spec: &MarketSpec, exec: Exec) -> Result<Vec<WeightedPath>> {
    let t = spec.horizon;
    if t > PATH_CAP {
        return Err(Error::PathCap {
            horizon: t,
            cap: PATH_CAP,
        });
    }
    let flip: Vec<f64> = spec.gamma.iter().map(|g| flip_prob(*g)).collect();
    Ok(exec.map_range(1usize << t, |bits| {
        let flips = bits as u64;
        let weight = (0..t)
            .map(|l| {
                if flips >> l & 1 == 1 {
                    flip[l]
                } else {
                    1.0 - flip[l]
                }
            })
            .product();
        WeightedPath {
            flips,
            path: RegimePath::from_flips(flips, t),
            weight,
        }
    }))
}

/// Stopping times of one path, from the fair and trader values on that path.
pub fn path_stopping(model: &Model, path: &RegimePath, trader: TraderType) -> Stopping {
    let t = model.horizon();
    let tau_s = (1..=t)
        .find(|&k| path.at(k) == Regime::Extreme)
        .unwrap_or(t);
    let theta_star = (0..tau_s)
        .find(|&k| model.traders.surface(k).value(k, path.at(k)) <= ZERO_TOL)
        .unwrap_or(tau_s);
    let tau_e = match trader {
        TraderType::Bad => theta_star,
        TraderType::NotSoBad if theta_star < tau_s => theta_star,
        TraderType::NotSoBad => (tau_s..t)
            .find(|&k| model.fair.value(k, path.at(k)) <= ZERO_TOL)
            .unwrap_or(t),
    };
    Stopping {
        tau_s,
        theta_star,
        tau_e,
    }
}

/// Absorption trajectories of the trader's chain from its calibration date:
/// `(absorption date or None, probability)`.
fn absorption_trajectories(calib: &TraderCalib) -> Vec<(Option<usize>, f64)> {
    let (k, t) = (calib.calib_time(), calib.horizon());
    let mut out = Vec::with_capacity(t - k + 1);
    let mut survive = 1.0;
    for a in k + 1..=t {
        let step = (-calib.intensity(a - 1)).exp();
        out.push((Some(a), survive * (1.0 - step)));
        survive *= step;
    }
    out.push((None, survive));
    out
}

fn trader_regime(absorbed: Option<usize>, l: usize) -> Regime {
    match absorbed {
        Some(a) if l >= a => Regime::Extreme,
        _ => Regime::Normal,
    }
}

/// Trader hedge ratios at the calibration date from their definition, by
/// enumerating the trader chain's absorption trajectories.
pub fn trader_ratios_brute(calib: &TraderCalib, surf: &TraderSurface) -> Vec<(f64, f64)> {
    let (k, t) = (calib.calib_time(), calib.horizon());
    let trajectories = absorption_trajectories(calib);
    let exit: Vec<usize> = trajectories
        .iter()
        .map(|(a, _)| {
            (k..t)
                .find(|&l| surf.value(l, trader_regime(*a, l)) <= ZERO_TOL)
                .unwrap_or(t)
        })
        .collect();
    (k + 1..=t)
        .map(|ell| {
            let (mut long, mut short, mut p_extreme) = (0.0, 0.0, 0.0);
            for ((a, w), &theta) in trajectories.iter().zip(&exit) {
                let extreme = trader_regime(*a, ell) == Regime::Extreme;
                if extreme {
                    p_extreme += w;
                }
                if ell <= theta {
                    if extreme {
                        long += w;
                    } else {
                        short += w;
                    }
                }
            }
            (safe_div(long, p_extreme), safe_div(short, 1.0 - p_extreme))
        })
        .collect()
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Trader's time-0 value as the best expected accrual over every adapted
/// stopping rule of its chain, by listing the rules one by one.
pub fn trader_stopping_max(calib: &TraderCalib) -> Result<f64> {
    let (k, t) = (calib.calib_time(), calib.horizon());
    let n = t - k;
    // decision nodes at depth j: still normal, or absorbed at one of j dates
    let nodes = n * (n + 1) / 2;
    if nodes > 24 {
        return Err(Error::NotApplicable(format!(
            "{nodes} decision nodes is too many to list"
        )));
    }
    let trajectories = absorption_trajectories(calib);
    // node id and coupon at each depth, per trajectory
    let walks: Vec<(Vec<usize>, Vec<f64>, f64)> = trajectories
        .iter()
        .map(|(a, w)| {
            let ids = (0..n)
                .map(|j| {
                    let offset = j * (j + 1) / 2;
                    match a {
                        Some(a) if a - k <= j => offset + (a - k),
                        _ => offset,
                    }
                })
                .collect();
            let coupons = (1..=n).map(|d| trader_regime(*a, k + d).coupon()).collect();
            (ids, coupons, *w)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for rule in 0u64..1 << nodes {
        let value: f64 = walks
            .iter()
            .map(|(ids, coupons, w)| {
                let stop = ids.iter().position(|&id| rule >> id & 1 == 1).unwrap_or(n);
                w * coupons[..stop].iter().sum::<f64>()
            })
            .sum();
        best = best.max(value);
    }
    Ok(best)
}

/// Fair value at `(k, regime)` as the best expected accrual over every adapted
/// stopping rule, by listing the rules one by one (at most four periods left).
pub fn fair_stopping_max_listed(spec: &MarketSpec, k: usize, regime: Regime) -> Result<f64> {
    let n = spec.horizon - k;
    if n > 4 {
        return Err(Error::NotApplicable(format!(
            "{n} periods is too many to list rules"
        )));
    }
    let nodes = (1usize << n) - 1;
    let flip: Vec<f64> = spec.gamma[k..].iter().map(|g| flip_prob(*g)).collect();
    let walks: Vec<(Vec<usize>, Vec<f64>, f64)> = (0..1u64 << n)
        .map(|bits| {
            let mut w = 1.0;
            let mut state = regime;
            let mut coupons = Vec::with_capacity(n);
            for (d, f) in flip.iter().enumerate() {
                if bits >> d & 1 == 1 {
                    state = state.flipped();
                    w *= f;
                } else {
                    w *= 1.0 - f;
                }
                coupons.push(state.coupon());
            }
            let ids = (0..n)
                .map(|j| (1 << j) - 1 + (bits & ((1 << j) - 1)) as usize)
                .collect();
            (ids, coupons, w)
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    for rule in 0u64..1 << nodes {
        let value: f64 = walks
            .iter()
            .map(|(ids, coupons, w)| {
                let stop = ids.iter().position(|&id| rule >> id & 1 == 1).unwrap_or(n);
                w * coupons[..stop].iter().sum::<f64>()
            })
            .sum();
        best = best.max(value);
    }
    Ok(best)
}

/// Fair value at `(k, regime)` by maximizing node by node over the explicit
/// (non-recombining) tree of paths from `k`.
pub fn fair_stopping_max_tree(spec: &MarketSpec, k: usize, regime: Regime) -> f64 {
    fn node(spec: &MarketSpec, date: usize, state: Regime) -> f64 {
        if date == spec.horizon {
            return 0.0;
        }
        let f = flip_prob(spec.gamma[date]);
        let stay = state;
        let moved = state.flipped();
        let cont = (1.0 - f) * (stay.coupon() + node(spec, date + 1, stay))
            + f * (moved.coupon() + node(spec, date + 1, moved));
        cont.max(0.0)
    }
    node(spec, k, regime)
}

/// Per-path, per-date replay of one trader.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PathPoint {
    pub accrual: f64,
    pub hedge_cash: f64,
    pub hedge_value: f64,
    pub pnl: f64,
    pub hva: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    pub compensated: f64,
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub trader: TraderType,
    pub horizon: usize,
    pub paths: Vec<WeightedPath>,
    pub stops: Vec<Stopping>,
    /// Post-switch hedge ratios per path, maturities `tau_s+1..=T`.
    pub rebalance: Vec<Option<Vec<(f64, f64)>>>,
    /// `[path][k]`
    pub points: Vec<Vec<PathPoint>>,
    pub hva0: f64,
}

impl OracleRun {
    pub fn run(model: &Model, trader: TraderType, exec: Exec) -> Result<Self> {
        let spec = &model.spec;
        let t = spec.horizon;
        let paths = enumerate_paths(spec, exec)?;
        let np = paths.len();
        let cx = CondExpect::new(&paths, t);
        let stops: Vec<Stopping> = exec.map(&paths, |p| path_stopping(model, &p.path, trader));

        let statics = trader_ratios_brute(model.traders.calib(0), model.traders.surface(0));
        let static_cash = |p: &WeightedPath, ell: usize| match p.path.at(ell) {
            Regime::Extreme => statics[ell - 1].0,
            Regime::Normal => -statics[ell - 1].1,
        };

        // post-switch fair ratios: hold each binary while the fair holder has not called
        let rebalance: Vec<Option<Vec<(f64, f64)>>> = if trader == TraderType::NotSoBad {
            let by_start: Vec<Vec<Vec<(f64, f64)>>> = exec.map_range(t, |s| {
                if s == 0 {
                    return Vec::new();
                }
                let fair_exit: Vec<usize> = paths
                    .iter()
                    .map(|p| {
                        (s..t)
                            .find(|&j| model.fair.value(j, p.path.at(j)) <= ZERO_TOL)
                            .unwrap_or(t)
                    })
                    .collect();
                let mut per_path = vec![Vec::with_capacity(t - s); np];
                for ell in s + 1..=t {
                    let ind = |f: &dyn Fn(usize, &WeightedPath) -> bool| -> Vec<f64> {
                        paths
                            .iter()
                            .enumerate()
                            .map(|(i, p)| if f(i, p) { 1.0 } else { 0.0 })
                            .collect()
                    };
                    let extreme = cx.at_level(&ind(&|_, p| p.path.at(ell) == Regime::Extreme), s);
                    let held_long = cx.at_level(
                        &ind(&|i, p| p.path.at(ell) == Regime::Extreme && ell <= fair_exit[i]),
                        s,
                    );
                    let held_short = cx.at_level(
                        &ind(&|i, p| p.path.at(ell) == Regime::Normal && ell <= fair_exit[i]),
                        s,
                    );
                    for i in 0..np {
                        per_path[i].push((
                            safe_div(held_long[i], extreme[i]),
                            safe_div(held_short[i], 1.0 - extreme[i]),
                        ));
                    }
                }
                per_path
            });
            paths
                .iter()
                .zip(&stops)
                .enumerate()
                .map(|(i, (p, st))| {
                    let switched = p.path.at(st.tau_s) == Regime::Extreme;
                    if st.called_pre_switch() || !switched {
                        None
                    } else if st.tau_s == t {
                        Some(Vec::new())
                    } else {
                        Some(by_start[st.tau_s][i].clone())
                    }
                })
                .collect()
        } else {
            vec![None; np]
        };

        let held_cash = |i: usize, ell: usize| -> f64 {
            let p = &paths[i];
            match &rebalance[i] {
                Some(r) => {
                    let (a, b) = r[ell - stops[i].tau_s - 1];
                    match p.path.at(ell) {
                        Regime::Extreme => a,
                        Regime::Normal => -b,
                    }
                }
                None => static_cash(p, ell),
            }
        };

        // hedge cash flow to k, stopped at exit
        let cash: Vec<Vec<f64>> = exec.map_range(np, |i| {
            let p = &paths[i];
            let st = stops[i];
            let mut out = Vec::with_capacity(t + 1);
            let mut acc = 0.0;
            out.push(0.0);
            for k in 1..=t {
                if k <= st.tau_e {
                    if k <= st.tau_s || rebalance[i].is_none() {
                        acc += static_cash(p, k);
                    }
                    if k == st.tau_s && rebalance[i].is_some() {
                        acc += 1.0;
                    }
                    if k > st.tau_s && rebalance[i].is_some() {
                        acc += held_cash(i, k);
                    }
                }
                out.push(acc);
            }
            out
        });

        // fair value at exit of what is still held
        let leftover: Vec<f64> = (0..np)
            .map(|i| (stops[i].tau_e + 1..=t).map(|ell| held_cash(i, ell)).sum())
            .collect();
        let exit_level: Vec<usize> = stops.iter().map(|s| s.tau_e).collect();
        let exit_value = cx.at_levels(&leftover, &exit_level);
        let total: Vec<f64> = (0..np)
            .map(|i| cash[i][stops[i].tau_e] + exit_value[i])
            .collect();

        // value of the time-0 static hedge, unstopped
        let static_value: Vec<Vec<f64>> = {
            let by_level: Vec<Vec<f64>> = exec.map_range(t + 1, |k| {
                let rest: Vec<f64> = paths
                    .iter()
                    .map(|p| (k + 1..=t).map(|ell| static_cash(p, ell)).sum())
                    .collect();
                cx.at_level(&rest, k)
            });
            (0..np)
                .map(|i| (0..=t).map(|k| by_level[k][i]).collect())
                .collect()
        };
        let expected_total: Vec<Vec<f64>> =
            transpose(exec.map_range(t + 1, |k| cx.at_level(&total, k)));

        let fair_at = |i: usize, k: usize| model.fair.value(k, paths[i].path.at(k));
        let accrual = |i: usize, k: usize| -> f64 {
            (1..=k.min(stops[i].tau_e))
                .map(|l| paths[i].path.at(l).coupon())
                .sum()
        };
        let hedge_value = |i: usize, k: usize| -> f64 {
            if k < stops[i].tau_e {
                expected_total[i][k] - cash[i][k]
            } else {
                exit_value[i]
            }
        };

        let pnl: Vec<Vec<f64>> = exec.map_range(np, |i| {
            let st = stops[i];
            (0..=t)
                .map(|k| {
                    let j = k.min(st.tau_e);
                    let pre = j < st.tau_s;
                    let mark = if pre {
                        model.traders.surface(j).price()
                    } else {
                        fair_at(i, j)
                    };
                    let held = match trader {
                        TraderType::NotSoBad if pre => static_value[i][j],
                        _ => hedge_value(i, j),
                    };
                    let mut x = accrual(i, k) + mark - (cash[i][j] + held);
                    if trader == TraderType::Bad && k >= st.tau_e && !st.called_pre_switch() {
                        x -= fair_at(i, st.tau_e);
                    }
                    x
                })
                .collect()
        });

        let terminal: Vec<f64> = pnl.iter().map(|r| r[t]).collect();
        let expected_terminal = transpose(exec.map_range(t + 1, |k| cx.at_level(&terminal, k)));
        let exit_d: Vec<f64> = (0..np)
            .map(|i| {
                let st = stops[i];
                if !st.called_pre_switch() {
                    return 0.0;
                }
                let q = fair_at(i, st.tau_e);
                match trader {
                    TraderType::Bad => q,
                    TraderType::NotSoBad => q - (exit_value[i] - static_value[i][st.tau_e]),
                }
            })
            .collect();
        let exit_d_prime: Vec<f64> = (0..np)
            .map(|i| {
                if trader == TraderType::Bad && !stops[i].called_pre_switch() {
                    fair_at(i, stops[i].tau_e)
                } else {
                    0.0
                }
            })
            .collect();
        let exit_k: Vec<f64> = (0..np)
            .map(|i| accrual(i, stops[i].tau_e) + fair_at(i, stops[i].tau_e))
            .collect();
        let d = transpose(exec.map_range(t + 1, |k| cx.at_level(&exit_d, k)));
        let d_prime = transpose(exec.map_range(t + 1, |k| cx.at_level(&exit_d_prime, k)));
        let drift = transpose(exec.map_range(t + 1, |k| cx.at_level(&exit_k, k)));

        let mut points = vec![vec![PathPoint::default(); t + 1]; np];
        for i in 0..np {
            for k in 0..=t {
                let j = k.min(stops[i].tau_e);
                let hva = pnl[i][k] - expected_terminal[i][k];
                points[i][k] = PathPoint {
                    accrual: accrual(i, k),
                    hedge_cash: cash[i][j],
                    hedge_value: hedge_value(i, j),
                    pnl: pnl[i][k],
                    hva,
                    chi1: d[i][k],
                    chi2: if k < stops[i].tau_e {
                        d_prime[i][k]
                    } else {
                        0.0
                    },
                    chi3: accrual(i, k) + fair_at(i, j) - drift[i][k],
                    compensated: 0.0,
                };
            }
        }
        let hva0 = points[0][0].hva;
        for row in points.iter_mut() {
            for p in row.iter_mut() {
                p.compensated = -p.pnl + p.hva - hva0;
            }
        }

        Ok(OracleRun {
            trader,
            horizon: t,
            paths,
            stops,
            rebalance,
            points,
            hva0,
        })
    }

    /// Economic capital per path and date, and KVA at 0.
    pub fn capital(
        &self,
        alpha: f64,
        hurdle_rate: f64,
        convention: EsConvention,
        exec: Exec,
    ) -> Result<(Vec<Vec<f64>>, f64)> {
        let t = self.horizon;
        let np = self.paths.len();
        let per_level: Vec<Vec<f64>> = exec
            .map_range(t, |k| -> Result<Vec<f64>> {
                let mask = (1u64 << k) - 1;
                let groups = 1usize << k;
                let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
                for (i, p) in self.paths.iter().enumerate() {
                    members[(p.flips & mask) as usize].push(i);
                }
                let mut ec_group = vec![0.0; groups];
                for (g, idx) in members.iter().enumerate() {
                    let mass: f64 = idx.iter().map(|&i| self.paths[i].weight).sum();
                    if mass <= 0.0 {
                        continue;
                    }
                    let law: Vec<(f64, f64)> = idx
                        .iter()
                        .map(|&i| {
                            let row = &self.points[i];
                            (
                                row[k + 1].compensated - row[k].compensated,
                                self.paths[i].weight / mass,
                            )
                        })
                        .collect();
                    ec_group[g] = expected_shortfall(&law, alpha, convention)?;
                }
                Ok(self
                    .paths
                    .iter()
                    .map(|p| ec_group[(p.flips & mask) as usize])
                    .collect())
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let mut ec = vec![vec![0.0; t + 1]; np];
        for (k, level) in per_level.iter().enumerate() {
            for i in 0..np {
                ec[i][k] = level[i];
            }
        }
        let kva0 = hurdle_rate
            * (0..t)
                .map(|k| {
                    let mean: f64 = (0..np).map(|i| self.paths[i].weight * ec[i][k]).sum();
                    (-hurdle_rate * k as f64).exp() * mean
                })
                .sum::<f64>();
        Ok((ec, kva0))
    }

    /// Largest spread of any per-path output within one atom of the ledger's partition.
    pub fn within_atom_spread(&self, ledger: &XvaLedger) -> f64 {
        let n = ledger.partition.len();
        let mut first: Vec<Option<usize>> = vec![None; n];
        let mut worst: f64 = 0.0;
        for (i, p) in self.paths.iter().enumerate() {
            let a = ledger.partition.atom_of_path(&p.path);
            match first[a] {
                None => first[a] = Some(i),
                Some(f) => {
                    if self.stops[f] != self.stops[i] {
                        return f64::INFINITY;
                    }
                    for (x, y) in self.points[f].iter().zip(&self.points[i]) {
                        for (u, v) in fields(x).iter().zip(fields(y)) {
                            worst = worst.max((u - v).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Largest engine-vs-oracle discrepancies per quantity.
    pub fn compare(
        &self,
        model: &Model,
        ledger: &XvaLedger,
        capital: Option<(&CapitalProfile, &[Vec<f64>], f64)>,
    ) -> Discrepancies {
        let t = self.horizon;
        let mut out = Discrepancies::default();
        for (i, p) in self.paths.iter().enumerate() {
            if p.weight <= 0.0 {
                continue;
            }
            let a = ledger.partition.atom_of_path(&p.path);
            if ledger.schedule.get(a) != self.stops[i] {
                out.stopping_mismatches += 1;
            }
            for k in 0..=t {
                let e = ledger.at(a, k);
                let o = &self.points[i][k];
                bump(&mut out.accrual, e.accrual - o.accrual);
                bump(&mut out.hedge_cash, e.hedge_cash - o.hedge_cash);
                bump(&mut out.hedge_value, e.hedge_value - o.hedge_value);
                bump(&mut out.pnl, e.pnl - o.pnl);
                bump(&mut out.hva, e.hva - o.hva);
                bump(&mut out.chi1, e.chi1 - o.chi1);
                bump(&mut out.chi2, e.chi2 - o.chi2);
                bump(&mut out.chi3, e.chi3 - o.chi3);
                bump(&mut out.compensated, e.compensated - o.compensated);
                if let Some((profile, ec, _)) = capital {
                    bump(&mut out.ec, profile.ec[a][k] - ec[i][k]);
                }
            }
        }
        if let Some((profile, _, kva0)) = capital {
            bump(&mut out.kva0, profile.kva0 - kva0);
        }
        out.prices = self.price_gap(&model.spec);
        out
    }

    /// Closed-form binary prices against path averages, every date and maturity.
    pub fn price_gap(&self, spec: &MarketSpec) -> f64 {
        let t = self.horizon;
        let cx = CondExpect::new(&self.paths, t);
        let mut worst: f64 = 0.0;
        for ell in 1..=t {
            let ind: Vec<f64> = self
                .paths
                .iter()
                .map(|p| {
                    if p.path.at(ell) == Regime::Extreme {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            for k in 0..=ell {
                let avg = cx.at_level(&ind, k);
                for (p, x) in self.paths.iter().zip(&avg) {
                    if p.weight > 0.0 {
                        let closed = binary_price_unchecked(spec, k, ell, p.path.at(k));
                        worst = worst.max((closed - x).abs());
                    }
                }
            }
        }
        worst
    }
}

fn fields(p: &PathPoint) -> [f64; 9] {
    [
        p.accrual,
        p.hedge_cash,
        p.hedge_value,
        p.pnl,
        p.hva,
        p.chi1,
        p.chi2,
        p.chi3,
        p.compensated,
    ]
}

fn bump(slot: &mut f64, gap: f64) {
    *slot = slot.max(gap.abs());
}

fn transpose(by_level: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let np = by_level.first().map_or(0, Vec::len);
    (0..np)
        .map(|i| by_level.iter().map(|level| level[i]).collect())
        .collect()
}

/// Largest absolute engine-vs-oracle gap per quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Discrepancies {
    pub stopping_mismatches: usize,
    pub prices: f64,
    pub accrual: f64,
    pub hedge_cash: f64,
    pub hedge_value: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    pub pnl: f64,
    pub hva: f64,
    pub compensated: f64,
    pub ec: f64,
    pub kva0: f64,
}

impl Discrepancies {
    pub fn max(&self) -> f64 {
        if self.stopping_mismatches > 0 {
            return f64::INFINITY;
        }
        [
            self.prices,
            self.accrual,
            self.hedge_cash,
            self.hedge_value,
            self.chi1,
            self.chi2,
            self.chi3,
            self.pnl,
            self.hva,
            self.compensated,
            self.ec,
            self.kva0,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Weighted averages over paths sharing a prefix.
struct CondExpect<'a> {
    paths: &'a [WeightedPath],
    horizon: usize,
}

impl<'a> CondExpect<'a> {
    fn new(paths: &'a [WeightedPath], horizon: usize) -> Self {
        CondExpect { paths, horizon }
    }

    /// Per path, the average of `values` over paths agreeing with it up to `k`.
    fn at_level(&self, values: &[f64], k: usize) -> Vec<f64> {
        debug_assert!(k <= self.horizon);
        let mask = (1u64 << k) - 1;
        let mut num = vec![0.0; 1 << k];
        let mut den = vec![0.0; 1 << k];
        for (p, x) in self.paths.iter().zip(values) {
            let g = (p.flips & mask) as usize;
            num[g] += p.weight * x;
            den[g] += p.weight;
        }
        self.paths
            .iter()
            .map(|p| {
                let g = (p.flips & mask) as usize;
                safe_div(num[g], den[g])
            })
            .collect()
    }

    /// Per path, the average at that path's own level.
    fn at_levels(&self, values: &[f64], levels: &[usize]) -> Vec<f64> {
        let by_level: Vec<Vec<f64>> = (0..=self.horizon)
            .map(|k| self.at_level(values, k))
            .collect();
        levels
            .iter()
            .enumerate()
            .map(|(i, &k)| by_level[k][i])
            .collect()
    }
}

/// Seeded Monte Carlo estimate of the expected accrual at exit, with its
/// standard error, for horizons past the enumeration cap.
pub fn monte_carlo_exit_accrual(
    model: &Model,
    trader: TraderType,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::NotApplicable(
            "Monte Carlo needs at least two samples".into(),
        ));
    }
    if trader == TraderType::NotSoBad {
        model.fair.require_q_flat()?;
    }
    let t = model.horizon();
    let flip: Vec<f64> = model.spec.gamma.iter().map(|g| flip_prob(*g)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut states = Vec::with_capacity(t + 1);
    for _ in 0..samples {
        states.clear();
        let mut state = Regime::Normal;
        states.push(state);
        for f in &flip {
            if rng.gen::<f64>() < *f {
                state = state.flipped();
            }
            states.push(state);
        }
        let path = RegimePath::from_states(states.clone())?;
        let stop = path_stopping(model, &path, trader);
        let x: f64 = (1..=stop.tau_e).map(|l| path.at(l).coupon()).sum();
        sum += x;
        sum_sq += x * x;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
