//! Maximum-impedance ring layouts with f0 inside a target band.
//!
//! For a fixed film, Z·f0 ∝ 1/r_in while f0 falls with r_in, so Z is largest
//! at the low band edge with the narrowest trace and the tightest pitch
//! allowed. The optimizer solves for that r_in directly; [`grid_search`]
//! re-derives the optimum by brute force as a check.

use serde::{Deserialize, Serialize};

use crate::calibration::{DeviceRecord, DeviceTable};
use crate::error::{Error, Result};
use crate::lsq;
use crate::material::{self, MaterialSpec};
use crate::ring_model::{self, CalibrationConstants, CircuitParams, RingGeometry};

/// Suspended rings: impedance enhancement over on-substrate devices.
pub const SUSPENDED_FACTOR: f64 = 3.0;
/// Relative f0 tolerance of emitted candidates.
pub const F0_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConstraints {
    /// [f_min, f_max], GHz.
    pub band: [f64; 2],
    /// nm
    pub w_min: f64,
    /// nm
    pub p_min: f64,
    /// nm
    pub t_min: f64,
    /// µΩ·cm
    pub resistivity_max: f64,
    /// pH/sq
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sheet_inductance_max: Option<f64>,
    /// [min, max], µm.
    pub r_in_range: [f64; 2],
    #[serde(default)]
    pub suspended: bool,
}

impl Default for DesignConstraints {
    fn default() -> Self {
        DesignConstraints {
            band: [4.0, 8.0],
            w_min: 150.0,
            p_min: 200.0,
            t_min: 20.0,
            resistivity_max: material::SIT_WARNING,
            sheet_inductance_max: None,
            r_in_range: [0.5, 200.0],
            suspended: false,
        }
    }
}

impl DesignConstraints {
    /// Narrower 120 nm traces, as in the simulated designs.
    pub fn relaxed() -> Self {
        DesignConstraints {
            w_min: 120.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [f_min, f_max] = self.band;
        if !(f_min > 0.0 && f_min <= f_max && f_max.is_finite()) {
            return Err(Error::invalid(format!("band must satisfy 0 < f_min ≤ f_max, got [{f_min}, {f_max}]")));
        }
        let [r_lo, r_hi] = self.r_in_range;
        if !(r_lo > 0.0 && r_lo < r_hi && r_hi.is_finite()) {
            return Err(Error::invalid(format!("r_in range must satisfy 0 < min < max, got [{r_lo}, {r_hi}]")));
        }
        if !(self.w_min > 0.0 && self.p_min > 0.0 && self.t_min > 0.0 && self.resistivity_max > 0.0) {
            return Err(Error::invalid("width, pitch, thickness and resistivity limits must be positive"));
        }
        if self.w_min > self.p_min {
            return Err(Error::invalid(format!(
                "w_min {} nm exceeds p_min {} nm",
                self.w_min, self.p_min
            )));
        }
        if let Some(l) = self.sheet_inductance_max {
            if !(l > 0.0) {
                return Err(Error::invalid("sheet inductance cap must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    WidthMin,
    PitchMin,
    ThicknessMin,
    ResistivityMax,
    SheetInductanceMax,
    RadiusRange,
    Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub value: f64,
    pub limit: f64,
    /// Distance to the limit in the constraint's units; negative when
    /// violated.
    pub margin: f64,
}

impl ConstraintCheck {
    pub fn satisfied(&self) -> bool {
        self.margin >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCandidate {
    pub geometry: RingGeometry,
    pub material: MaterialSpec,
    /// pH/sq
    pub sheet_inductance: f64,
    pub predicted: CircuitParams,
    pub checks: Vec<ConstraintCheck>,
    /// kΩ; annotation only, f0 is not adjusted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suspended_impedance: Option<f64>,
}

impl DesignCandidate {
    pub fn build(geometry: RingGeometry, material: MaterialSpec, k_c: f64) -> Result<Self> {
        let sheet_inductance = material::sheet_inductance(&material)?;
        let predicted =
            ring_model::predict_with_sheet_inductance(&geometry, sheet_inductance, &CalibrationConstants::with_k_c(k_c)?)?;
        Ok(DesignCandidate {
            geometry,
            material,
            sheet_inductance,
            predicted,
            checks: Vec::new(),
            suspended_impedance: None,
        })
    }

    /// Candidate for a tabulated device, using its L_sq and length.
    pub fn from_record(record: &DeviceRecord, k_c: f64) -> Result<Self> {
        let material = MaterialSpec::from_sheet_inductance(record.sheet_inductance, record.t, material::DEFAULT_TC_K)?;
        DesignCandidate::build(record.geometry(), material, k_c)
    }

    pub fn is_feasible(&self) -> bool {
        self.checks.iter().all(ConstraintCheck::satisfied)
    }
}

fn lower(constraint: Constraint, value: f64, limit: f64) -> ConstraintCheck {
    ConstraintCheck {
        constraint,
        value,
        limit,
        margin: value - limit,
    }
}

fn upper(constraint: Constraint, value: f64, limit: f64) -> ConstraintCheck {
    ConstraintCheck {
        constraint,
        value,
        limit,
        margin: limit - value,
    }
}

/// Every constraint with its margin.
pub fn evaluate_constraints(candidate: &DesignCandidate, constraints: &DesignConstraints) -> Vec<ConstraintCheck> {
    let g = &candidate.geometry;
    let mut out = vec![
        lower(Constraint::WidthMin, g.w, constraints.w_min),
        lower(Constraint::PitchMin, g.p, constraints.p_min),
        lower(Constraint::ThicknessMin, g.t, constraints.t_min),
        upper(Constraint::ResistivityMax, candidate.material.resistivity, constraints.resistivity_max),
    ];
    if let Some(l) = constraints.sheet_inductance_max {
        out.push(upper(Constraint::SheetInductanceMax, candidate.sheet_inductance, l));
    }
    let [r_lo, r_hi] = constraints.r_in_range;
    let r_margin = (g.r_in - r_lo).min(r_hi - g.r_in);
    out.push(ConstraintCheck {
        constraint: Constraint::RadiusRange,
        value: g.r_in,
        limit: if g.r_in < r_lo { r_lo } else { r_hi },
        margin: r_margin,
    });
    let f0 = candidate.predicted.f0;
    let [f_lo, f_hi] = constraints.band;
    let (lo, hi) = (f_lo * (1.0 - F0_TOLERANCE), f_hi * (1.0 + F0_TOLERANCE));
    out.push(ConstraintCheck {
        constraint: Constraint::Band,
        value: f0,
        limit: if f0 < lo { f_lo } else { f_hi },
        margin: (f0 - lo).min(hi - f0),
    });
    out
}

/// Violated constraints only; empty means feasible.
pub fn feasibility_check(candidate: &DesignCandidate, constraints: &DesignConstraints) -> Vec<ConstraintCheck> {
    evaluate_constraints(candidate, constraints)
        .into_iter()
        .filter(|c| !c.satisfied())
        .collect()
}

/// Suspended-ring impedance estimate 3·Z (kΩ).
pub fn suspended_annotation(z_kohm: f64) -> Result<f64> {
    if !(z_kohm > 0.0 && z_kohm.is_finite()) {
        return Err(Error::invalid(format!("impedance must be positive, got {z_kohm}")));
    }
    Ok(SUSPENDED_FACTOR * z_kohm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infeasible {
    pub material: MaterialSpec,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    /// Descending impedance; ties by higher f0, then smaller r_in.
    pub candidates: Vec<DesignCandidate>,
    pub infeasible: Vec<Infeasible>,
}

/// f0 (GHz) at radius `r` with a continuous meander count 2πr/p.
fn f0_continuous(r: f64, w: f64, p: f64, lsq_ph: f64, k_c: f64) -> f64 {
    let n = 2.0 * std::f64::consts::PI * r / (p * 1e-3);
    f0_with_count(n, r, w, p, lsq_ph, k_c)
}

fn f0_with_count(n: f64, r: f64, w: f64, p: f64, lsq_ph: f64, k_c: f64) -> f64 {
    let len = ring_model::meander_length(n, r, p);
    ring_model::fundamental_frequency(ring_model::total_inductance(len, w, lsq_ph), ring_model::capacitance(r, k_c))
}

/// Radius in [lo, hi] where the strictly decreasing `f0(r)` meets `target`.
fn solve_radius(f0: impl Fn(f64) -> f64, target: f64, seed: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = ((seed / 2.0).max(lo), (seed * 2.0).min(hi));
    let (a, b) = if f0(a) >= target && f0(b) <= target { (a, b) } else { (lo, hi) };
    let r = lsq::golden_min(|r| (f0(r) / target).ln().abs(), a, b, a * 1e-12);
    r.clamp(lo, hi)
}

fn optimize_material(
    constraints: &DesignConstraints,
    k_c: f64,
    material: &MaterialSpec,
) -> std::result::Result<DesignCandidate, String> {
    material.validate().map_err(|e| e.to_string())?;
    let lsq_ph = material::sheet_inductance(material).map_err(|e| e.to_string())?;
    if material.thickness < constraints.t_min {
        return Err(format!(
            "film thickness {} nm is below the {} nm minimum",
            material.thickness, constraints.t_min
        ));
    }
    if material.resistivity > constraints.resistivity_max {
        return Err(format!(
            "resistivity {} µΩ·cm exceeds the {} µΩ·cm limit",
            material.resistivity, constraints.resistivity_max
        ));
    }
    if let Some(cap) = constraints.sheet_inductance_max {
        if lsq_ph > cap {
            return Err(format!("sheet inductance {lsq_ph:.1} pH/sq exceeds the {cap} pH/sq cap"));
        }
    }
    let (w, p) = (constraints.w_min, constraints.p_min);
    if !(w < p) {
        return Err(format!("trace width {w} nm leaves no gap at pitch {p} nm"));
    }
    let [r_lo, r_hi] = constraints.r_in_range;
    let [f_min, f_max] = constraints.band;
    let f = |r: f64| f0_continuous(r, w, p, lsq_ph, k_c);
    if f(r_lo) < f_min * (1.0 - F0_TOLERANCE) {
        return Err(format!(
            "band unreachable: f0 at the smallest radius {r_lo} µm is {:.4} GHz, below {f_min} GHz",
            f(r_lo)
        ));
    }
    let target = if f(r_hi) > f_min {
        if f(r_hi) > f_max * (1.0 + F0_TOLERANCE) {
            return Err(format!(
                "band unreachable: f0 at the largest radius {r_hi} µm is {:.4} GHz, above {f_max} GHz",
                f(r_hi)
            ));
        }
        f(r_hi)
    } else {
        f_min
    };

    // ℓ ≈ 2πr²/p gives f0 ∝ r^{-3/2}
    let scale = f(1.0);
    let seed = (scale / target).powf(2.0 / 3.0);
    let r_cont = solve_radius(f, target, seed, r_lo, r_hi);

    // floor N, then re-solve r at fixed N
    let n = ring_model::meander_count(r_cont, p);
    let fixed = |r: f64| f0_with_count(n, r, w, p, lsq_ph, k_c);
    let r = solve_radius(fixed, target, r_cont, r_cont, r_hi.max(r_cont));
    let geometry = RingGeometry::new(r, w, p, material.thickness)
        .map_err(|e| e.to_string())?
        .with_length(ring_model::meander_length(n, r, p));
    let mut c = DesignCandidate::build(geometry, *material, k_c).map_err(|e| e.to_string())?;
    c.checks = evaluate_constraints(&c, constraints);
    if constraints.suspended {
        c.suspended_impedance = Some(SUSPENDED_FACTOR * c.predicted.impedance);
    }
    if !c.is_feasible() {
        let v: Vec<String> = feasibility_check(&c, constraints)
            .iter()
            .map(|v| format!("{:?}", v.constraint))
            .collect();
        return Err(format!("best layout violates {}", v.join(", ")));
    }
    Ok(c)
}

fn rank(candidates: &mut [DesignCandidate]) {
    candidates.sort_by(|a, b| {
        b.predicted
            .impedance
            .total_cmp(&a.predicted.impedance)
            .then(b.predicted.f0.total_cmp(&a.predicted.f0))
            .then(a.geometry.r_in.total_cmp(&b.geometry.r_in))
    });
}

/// Best layout per material at the low band edge, ranked by impedance.
pub fn optimize(constraints: &DesignConstraints, k_c: f64, materials: &[MaterialSpec]) -> Result<Optimization> {
    constraints.validate()?;
    if materials.is_empty() {
        return Err(Error::invalid("at least one material option is required"));
    }
    if !(k_c > 0.0) {
        return Err(Error::invalid(format!("k_C must be positive, got {k_c}")));
    }
    let mut candidates = Vec::new();
    let mut infeasible = Vec::new();
    for m in materials {
        match optimize_material(constraints, k_c, m) {
            Ok(c) => candidates.push(c),
            Err(reason) => infeasible.push(Infeasible { material: *m, reason }),
        }
    }
    rank(&mut candidates);
    Ok(Optimization { candidates, infeasible })
}

impl Optimization {
    /// Candidates as a device table, ids `opt-1`, `opt-2`, ... in rank order.
    pub fn to_table(&self) -> Result<DeviceTable> {
        let records = self
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| DeviceRecord {
                id: format!("opt-{}", i + 1),
                r_in: c.geometry.r_in,
                w: c.geometry.w,
                length: c.predicted.trace_length,
                p: c.geometry.p,
                t: c.geometry.t,
                f0: c.predicted.f0,
                sheet_inductance: c.sheet_inductance,
                inductance: c.predicted.inductance,
                capacitance: c.predicted.capacitance,
                impedance: c.predicted.impedance,
                q_c: None,
            })
            .collect();
        DeviceTable::new("optimizer", records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Pitch and width values tried between the minimum and `span`× it.
    pub pw_steps: usize,
    pub pw_span: f64,
    /// Log-spaced radii over the allowed range.
    pub r_steps: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            pw_steps: 5,
            pw_span: 2.0,
            r_steps: 4000,
        }
    }
}

/// Brute-force search over (p, w, r_in) with floored meander counts; the
/// highest-impedance in-band layout for one material.
pub fn grid_search(
    constraints: &DesignConstraints,
    k_c: f64,
    material: &MaterialSpec,
    opts: &GridOptions,
) -> Result<Option<DesignCandidate>> {
    constraints.validate()?;
    let lsq_ph = material::sheet_inductance(material)?;
    let [r_lo, r_hi] = constraints.r_in_range;
    let [f_min, f_max] = constraints.band;
    let (lo, hi) = (f_min * (1.0 - F0_TOLERANCE), f_max * (1.0 + F0_TOLERANCE));
    let axis = |min: f64, i: usize| {
        if opts.pw_steps <= 1 {
            min
        } else {
            min * (1.0 + (opts.pw_span - 1.0) * i as f64 / (opts.pw_steps - 1) as f64)
        }
    };
    let mut best: Option<(f64, f64, RingGeometry)> = None;
    for ip in 0..opts.pw_steps.max(1) {
        let p = axis(constraints.p_min, ip);
        for iw in 0..opts.pw_steps.max(1) {
            let w = axis(constraints.w_min, iw);
            if w >= p {
                continue;
            }
            for ir in 0..opts.r_steps {
                let r = r_lo * (r_hi / r_lo).powf(ir as f64 / (opts.r_steps - 1) as f64);
                let n = ring_model::meander_count(r, p);
                let f0 = f0_with_count(n, r, w, p, lsq_ph, k_c);
                if f0 < lo || f0 > hi {
                    continue;
                }
                let z = ring_model::impedance(f0, ring_model::total_inductance(ring_model::meander_length(n, r, p), w, lsq_ph));
                let better = best.as_ref().is_none_or(|(bz, bf, bg)| {
                    z > *bz || (z == *bz && (f0 > *bf || (f0 == *bf && r < bg.r_in)))
                });
                if better {
                    let g = RingGeometry::new(r, w, p, material.thickness)?.with_length(ring_model::meander_length(n, r, p));
                    best = Some((z, f0, g));
                }
            }
        }
    }
    best.map(|(_, _, g)| {
        let mut c = DesignCandidate::build(g, *material, k_c)?;
        c.checks = evaluate_constraints(&c, constraints);
        Ok(c)
    })
    .transpose()
}
