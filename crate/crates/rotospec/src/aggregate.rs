//! Multi-subcarrier fusion.
//!
//! Per-subcarrier estimates of one machine are fused by taking the median
//! rpm as the convergence-zone center, averaging the estimates within
//! +/-60 rpm of it, and reporting how many subcarriers landed inside the
//! zone (the level of convergence). A convergence ratio below 95% flags
//! the configuration for threshold/gain reconfiguration; the flag is
//! reported, never acted on automatically.

use crate::error::{Error, Result};
use crate::speed::SpeedEstimate;

/// Convergence-zone halfwidth: +/-60 rpm (+/-1 Hz at unit charge) around
/// the median, inclusive.
pub const ZONE_HALFWIDTH_RPM: f64 = 60.0;

/// Convergence ratio below which the configuration is flagged.
pub const RELIABLE_LOC_RATIO: f64 = 0.95;

/// Fused speed and convergence accounting for one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub machine_index: usize,
    pub fused_rpm: f64,
    /// Count of in-zone subcarrier estimates (the level of convergence).
    pub loc: usize,
    /// `loc` over the number of contributing estimates.
    pub loc_ratio: f64,
    pub zone_center_rpm: f64,
    pub zone_halfwidth_rpm: f64,
    /// Subcarrier indices whose estimates fell outside the zone, ascending.
    pub outlier_subcarriers: Vec<usize>,
    /// True when `loc_ratio < 0.95`.
    pub reconfigure_flag: bool,
    /// Number of estimates that contributed (subcarriers that detected
    /// this machine). Zero means the machine went undetected everywhere.
    pub contributing: usize,
}

impl AggregateReport {
    /// Report for a machine no subcarrier detected.
    pub fn undetected(machine_index: usize) -> Self {
        AggregateReport {
            machine_index,
            fused_rpm: 0.0,
            loc: 0,
            loc_ratio: 0.0,
            zone_center_rpm: 0.0,
            zone_halfwidth_rpm: ZONE_HALFWIDTH_RPM,
            outlier_subcarriers: Vec::new(),
            reconfigure_flag: true,
            contributing: 0,
        }
    }
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fuse the per-subcarrier estimates of a single machine.
///
/// All estimates must share a machine index. The median and the in-zone
/// mean are computed over an internally sorted copy, so every field is
/// invariant under permutations of the input, bit for bit. In the
/// degenerate case where no estimate lies within the zone of its own
/// median (possible only for wildly split inputs), the fused value falls
/// back to the zone center with `loc == 0`.
pub fn aggregate(estimates: &[SpeedEstimate]) -> Result<AggregateReport> {
    let Some(first) = estimates.first() else {
        return Err(Error::Domain("cannot aggregate zero estimates".into()));
    };
    if estimates.iter().any(|e| e.machine_index != first.machine_index) {
        return Err(Error::Domain(
            "aggregate requires estimates of a single machine".into(),
        ));
    }
    if estimates.iter().any(|e| !e.rpm.is_finite()) {
        return Err(Error::Domain("estimates must be finite".into()));
    }

    let mut sorted: Vec<f64> = estimates.iter().map(|e| e.rpm).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let center = median_of_sorted(&sorted);

    let in_zone: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|rpm| (rpm - center).abs() <= ZONE_HALFWIDTH_RPM)
        .collect();
    let loc = in_zone.len();
    let fused_rpm = if loc > 0 {
        in_zone.iter().sum::<f64>() / loc as f64
    } else {
        center
    };

    let mut outliers: Vec<usize> = estimates
        .iter()
        .filter(|e| (e.rpm - center).abs() > ZONE_HALFWIDTH_RPM)
        .map(|e| e.subcarrier_index)
        .collect();
    outliers.sort_unstable();

    let contributing = estimates.len();
    let loc_ratio = loc as f64 / contributing as f64;
    Ok(AggregateReport {
        machine_index: first.machine_index,
        fused_rpm,
        loc,
        loc_ratio,
        zone_center_rpm: center,
        zone_halfwidth_rpm: ZONE_HALFWIDTH_RPM,
        outlier_subcarriers: outliers,
        reconfigure_flag: loc_ratio < RELIABLE_LOC_RATIO,
        contributing,
    })
}

/// Order-preserving minimum-cost alignment of `values` onto `slots`
/// (both ascending). Returns, per value, the index into `slots` it maps
/// to. Ties prefer earlier slots; always solvable when
/// `values.len() <= slots.len()`.
fn align_to_slots(values: &[f64], slots: &[f64]) -> Vec<usize> {
    let m = values.len();
    let s = slots.len();
    debug_assert!(m <= s);
    // take[i][j]: estimate i (0-based) assigned to slot j when aligning
    // values[..=i] into slots[..=j].
    let mut cost = vec![vec![f64::INFINITY; s + 1]; m + 1];
    let mut take = vec![vec![false; s + 1]; m + 1];
    for c in cost[0].iter_mut() {
        *c = 0.0;
    }
    for i in 1..=m {
        for j in i..=s {
            let skip = cost[i][j - 1];
            let assign = cost[i - 1][j - 1] + (values[i - 1] - slots[j - 1]).abs();
            if assign < skip {
                cost[i][j] = assign;
                take[i][j] = true;
            } else {
                cost[i][j] = skip;
            }
        }
    }
    let mut assignment = vec![0usize; m];
    let (mut i, mut j) = (m, s);
    while i > 0 {
        if take[i][j] {
            assignment[i - 1] = j - 1;
            i -= 1;
        }
        j -= 1;
    }
    assignment
}

/// Fuse an N-subcarrier x M-machine estimate matrix into one report per
/// machine.
///
/// Within each subcarrier the (ascending-rpm) estimates are matched to
/// machines by an order-preserving nearest-median assignment: a first
/// pass computes per-rank medians across subcarriers, a second pass
/// aligns each subcarrier's estimates onto those medians. A subcarrier
/// contributing fewer than M estimates contributes only to the machines
/// it detected; its missing entries count neither in-zone nor as
/// outliers. Machines detected by no subcarrier yield an
/// [`AggregateReport::undetected`] placeholder.
pub fn aggregate_all(
    per_subcarrier: &[Vec<SpeedEstimate>],
    machine_count: usize,
) -> Vec<AggregateReport> {
    // Pass 1: rank medians. Rank j collects the j-th lowest estimate of
    // every subcarrier that produced more than j estimates.
    let mut rank_values: Vec<Vec<f64>> = vec![Vec::new(); machine_count];
    let mut sorted_rows: Vec<Vec<SpeedEstimate>> = Vec::with_capacity(per_subcarrier.len());
    for row in per_subcarrier {
        let mut row = row.clone();
        row.sort_by(|a, b| a.rpm.partial_cmp(&b.rpm).unwrap_or(std::cmp::Ordering::Equal));
        row.truncate(machine_count);
        for (j, est) in row.iter().enumerate() {
            rank_values[j].push(est.rpm);
        }
        sorted_rows.push(row);
    }
    let medians: Vec<Option<f64>> = rank_values
        .iter()
        .map(|vals| {
            if vals.is_empty() {
                None
            } else {
                let mut v = vals.clone();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Some(median_of_sorted(&v))
            }
        })
        .collect();
    let slots: Vec<(usize, f64)> = medians
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.map(|v| (j, v)))
        .collect();
    let slot_values: Vec<f64> = slots.iter().map(|(_, v)| *v).collect();

    // Pass 2: align each subcarrier onto the median slots and build the
    // per-machine columns.
    let mut columns: Vec<Vec<SpeedEstimate>> = vec![Vec::new(); machine_count];
    for row in &sorted_rows {
        if row.is_empty() {
            continue;
        }
        let rpms: Vec<f64> = row.iter().map(|e| e.rpm).collect();
        for (est, &slot) in row.iter().zip(align_to_slots(&rpms, &slot_values).iter()) {
            let machine = slots[slot].0;
            let mut est = est.clone();
            est.machine_index = machine;
            columns[machine].push(est);
        }
    }

    columns
        .into_iter()
        .enumerate()
        .map(|(j, column)| {
            if column.is_empty() {
                AggregateReport::undetected(j)
            } else {
                aggregate(&column).expect("non-empty single-machine column")
            }
        })
        .collect()
}
