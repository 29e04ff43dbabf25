//! Property suites over random instances, shared by the `verify` command
//! and the acceptance test. Each suite reports its worst measured error and,
//! on failure, the offending instance in a replayable form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constrained::{
    constrained_crlb, constrained_potential_gradient, distance_nullspace, orientation_dim, rp_constrained_crlb,
    rp_potential_gradient, ConstraintKind, RigidBodySet, RigidPose,
};
use crate::decentral::{
    audit_locality, degree_spectral_bound, distributed_aopt_gradient, distributed_dopt_gradient,
    distributed_eopt_gradient, power_iteration_eigvec, PowerIterParams, RoundNetwork, SolverOptions, TranscriptMode,
};
use crate::error::{Error, Result};
use crate::fisher::{crlb_unconstrained, fim, fim_from_rigidity, NoiseModel, DEFAULT_PINV_TOL};
use crate::geometry::{build_graph, rigidity_matrix, Configuration, RangingGraph};
use crate::instances::{random_framework, random_rigid_body_network, random_rigid_network};
use crate::linalg;
use crate::potentials::{potential_gradient, potential_value, GradientField, PotentialKind};

/// Deliberate implementation faults used to check that the suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// Negates the analytic potential gradients before they are compared.
    GradientSignFlip,
}

/// A problem instance in plain data, enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub dim: usize,
    pub tag_count: usize,
    pub anchor_count: usize,
    pub pairs: Vec<(usize, usize)>,
    pub points: Vec<Vec<f64>>,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bodies: Option<RigidBodySet>,
}

impl InstanceRecord {
    pub fn new(
        graph: &RangingGraph,
        config: &Configuration,
        noise: &NoiseModel,
        bodies: Option<&RigidBodySet>,
    ) -> Self {
        Self {
            dim: graph.dim(),
            tag_count: graph.tag_count(),
            anchor_count: graph.anchor_count(),
            pairs: graph.ranging_pairs().to_vec(),
            points: config.points(),
            noise: *noise,
            bodies: bodies.cloned(),
        }
    }

    pub fn rebuild(&self) -> Result<(RangingGraph, Configuration)> {
        let g = build_graph(self.dim, self.tag_count, self.anchor_count, &self.pairs)?;
        Ok((g, Configuration::from_points(self.dim, &self.points)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    /// Worst value over the instances (error, or margin for lower bounds).
    pub measured: f64,
    pub tolerance: f64,
    pub instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failing_instance: Option<InstanceRecord>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl PropertyReport {
    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e} (tolerance {:.1e}, {} instances){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.instances,
            if self.note.is_empty() { String::new() } else { format!(" [{}]", self.note) }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Instances per suite.
    pub instances: usize,
    /// Largest node count of the random frameworks.
    pub max_nodes: usize,
    /// Largest node count of the distributed-oracle networks.
    pub max_distributed_nodes: usize,
    /// Instances of the power-iteration and distributed E-opt suites.
    pub power_instances: usize,
    pub distributed: DistributedSettings,
    pub fault: Fault,
}

/// Richardson and power-iteration settings of the distributed suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistributedSettings {
    /// Richardson step as a fraction of 2 / lambda_bar.
    pub eta_fraction: f64,
    pub max_rounds: usize,
    pub tol: f64,
    pub power: PowerSettings,
}

impl Default for DistributedSettings {
    fn default() -> Self {
        let so = SolverOptions::new(1.0);
        Self { eta_fraction: 0.95, max_rounds: so.max_rounds, tol: so.tol, power: PowerSettings::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSettings {
    pub outer_iters: usize,
    pub inner_rounds: usize,
    pub final_rounds: usize,
    /// Instances need (lambda_2 - lambda_1) / lambda_bar at least this large.
    pub min_relative_gap: f64,
}

impl Default for PowerSettings {
    fn default() -> Self {
        Self { outer_iters: 6000, inner_rounds: 120, final_rounds: 200, min_relative_gap: 1e-2 }
    }
}

impl Default for SuiteOptions {
    /// Desk scale: a few instances per suite.
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 5,
            max_nodes: 12,
            max_distributed_nodes: 14,
            power_instances: 2,
            distributed: DistributedSettings::default(),
            fault: Fault::None,
        }
    }
}

fn rng_for(opts: &SuiteOptions, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(suite);
    rng
}

/// Tracks the worst instance of a suite.
struct Worst {
    value: f64,
    record: Option<InstanceRecord>,
    count: usize,
}

impl Worst {
    fn new() -> Self {
        Self { value: f64::NEG_INFINITY, record: None, count: 0 }
    }

    fn push(&mut self, value: f64, record: impl FnOnce() -> InstanceRecord) {
        self.count += 1;
        let value = if value.is_nan() { f64::INFINITY } else { value };
        if value > self.value {
            self.value = value;
            self.record = Some(record());
        }
    }

    /// Passes when the worst value is strictly below `tol`.
    fn report(self, name: &str, tol: f64) -> PropertyReport {
        let passed = self.count > 0 && self.value < tol;
        PropertyReport {
            name: name.into(),
            passed,
            measured: self.value,
            tolerance: tol,
            instances: self.count,
            failing_instance: if passed { None } else { self.record },
            note: String::new(),
        }
    }
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_noise(rng: &mut ChaCha8Rng) -> NoiseModel {
    let sigma = rng.random_range(0.05..0.5);
    if rng.random_bool(0.5) {
        NoiseModel::additive(sigma)
    } else {
        NoiseModel::log_normal(sigma)
    }
}

/// |F - R^T Q R|_F / |F|_F on random frameworks of both dimensions and noise models.
pub fn fim_rigidity_identity(opts: &SuiteOptions) -> Result<PropertyReport> {
    let mut rng = rng_for(opts, 1);
    let mut worst = Worst::new();
    for s in 0..opts.instances {
        let dim = 2 + s % 2;
        let anchors = rng.random_range(2..=4);
        let tags = rng.random_range(1..=opts.max_nodes.saturating_sub(anchors).max(1));
        let (g, c) = random_framework(dim, tags, anchors, 0.6, &mut rng)?;
        let noise = if s % 4 < 2 { NoiseModel::additive(0.1) } else { NoiseModel::log_normal(0.1) };
        let f = fim(&g, &c, &noise)?.full;
        let rqr = fim_from_rigidity(&g, &c, &noise)?;
        worst.push(rel_err_mat(&rqr, &f), || InstanceRecord::new(&g, &c, &noise, None));
    }
    Ok(worst.report("fim-rigidity identity", 1e-12))
}

/// rank(F) = rank(R) with cutoff 1e-9 sigma_max; measured is the number of mismatches.
pub fn kernel_equivalence(opts: &SuiteOptions) -> Result<PropertyReport> {
    let mut rng = rng_for(opts, 1);
    let mut mismatches = 0usize;
    let mut record = None;
    for s in 0..opts.instances {
        let dim = 2 + s % 2;
        let anchors = rng.random_range(2..=4);
        let tags = rng.random_range(1..=opts.max_nodes.saturating_sub(anchors).max(1));
        let (g, c) = random_framework(dim, tags, anchors, 0.6, &mut rng)?;
        let noise = if s % 4 < 2 { NoiseModel::additive(0.1) } else { NoiseModel::log_normal(0.1) };
        let f = fim(&g, &c, &noise)?.full;
        let r = rigidity_matrix(&g, &c)?;
        if linalg::rank(&f, 1e-9) != linalg::rank(&r, 1e-9) {
            mismatches += 1;
            record.get_or_insert_with(|| InstanceRecord::new(&g, &c, &noise, None));
        }
    }
    Ok(PropertyReport {
        name: "kernel equivalence".into(),
        passed: mismatches == 0 && opts.instances > 0,
        measured: mismatches as f64,
        tolerance: 1.0,
        instances: opts.instances,
        failing_instance: record,
        note: String::new(),
    })
}

/// lambda_min(F_U) > 0 on triangulation networks (dim + 1 anchors).
/// Measured is -min(lambda_min / lambda_max), so it must stay below 0.
pub fn triangulation_invertibility(opts: &SuiteOptions) -> Result<PropertyReport> {
    let mut rng = rng_for(opts, 3);
    let mut worst = Worst::new();
    for s in 0..opts.instances {
        let dim = 2 + s % 2;
        let tags = rng.random_range(1..=opts.max_nodes.saturating_sub(dim + 1).max(1));
        let (g, c) = random_rigid_network(dim, dim + 1, tags, false, &mut rng)?;
        let noise = random_noise(&mut rng);
        let (vals, _) = linalg::sym_eigen_sorted(&fim(&g, &c, &noise)?.tag_block());
        worst.push(-vals[0] / vals[vals.len() - 1], || InstanceRecord::new(&g, &c, &noise, None));
    }
    Ok(worst.report("triangulation invertibility", 0.0))
}

fn fd_gradient<F>(f: F, config: &Configuration, nodes: &[usize], h: f64) -> Result<DVector<f64>>
where
    F: Fn(&Configuration) -> Result<f64>,
{
    let n = config.dim();
    let mut out = DVector::zeros(n * nodes.len());
    for (k, &i) in nodes.iter().enumerate() {
        for c in 0..n {
            let mut plus = config.clone();
            plus.coords_mut()[n * i + c] += h;
            let mut minus = config.clone();
            minus.coords_mut()[n * i + c] -= h;
            out[n * k + c] = (f(&plus)? - f(&minus)?) / (2.0 * h);
        }
    }
    Ok(out)
}

fn apply_fault(fault: Fault, mut field: GradientField) -> GradientField {
    if fault == Fault::GradientSignFlip {
        for g in field.entries.values_mut() {
            *g = -&*g;
        }
    }
    field
}

const FD_STEP: f64 = 1e-6;

fn kind_name(kind: PotentialKind) -> &'static str {
    match kind {
        PotentialKind::AOpt => "A",
        PotentialKind::DOpt => "D",
        PotentialKind::EOpt => "E",
    }
}

/// Analytic J_A, J_D and J_E gradients against central differences on
/// random rigid networks, over every node.
pub fn potential_gradient_checks(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let mut out = Vec::new();
    for (idx, kind) in [PotentialKind::AOpt, PotentialKind::DOpt, PotentialKind::EOpt].into_iter().enumerate() {
        let mut rng = rng_for(opts, 10 + idx as u64);
        let mut worst = Worst::new();
        let mut s = 0;
        while worst.count < opts.instances {
            let dim = 2 + s % 2;
            s += 1;
            let tags = rng.random_range(2..=opts.max_nodes.saturating_sub(dim + 1).clamp(2, 8));
            let (g, c) = random_rigid_network(dim, dim + 1, tags, true, &mut rng)?;
            let noise = random_noise(&mut rng);
            let f_u = fim(&g, &c, &noise)?.tag_block();
            if kind == PotentialKind::EOpt {
                let (vals, _) = linalg::sym_eigen_sorted(&f_u);
                if (vals[1] - vals[0]) < 1e-3 * vals[0] {
                    continue;
                }
            }
            let nodes: Vec<usize> = (0..g.node_count()).collect();
            let field = apply_fault(opts.fault, potential_gradient(kind, &g, &c, &noise, &nodes)?);
            let fd = fd_gradient(|cc| potential_value(kind, &fim(&g, cc, &noise)?.tag_block()), &c, &nodes, FD_STEP)?;
            worst.push(rel_err(&field.stacked(), &fd), || InstanceRecord::new(&g, &c, &noise, None));
        }
        out.push(worst.report(&format!("gradient J_{}", kind_name(kind)), 1e-5));
    }
    Ok(out)
}

/// Constrained gradients: J_c(D) over all coordinates and J_c(RP) along the
/// constraint manifold (robot translations and rotations).
pub fn constrained_gradient_checks(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let mut rng = rng_for(opts, 20);
    let mut worst_d = Worst::new();
    let mut worst_rp = Worst::new();
    for s in 0..opts.instances {
        let (dim, per) = if s % 2 == 0 { (2, 2 + s % 4 / 2) } else { (3, 3) };
        let (g, c, set) = random_rigid_body_network(dim, per, &mut rng)?;
        let noise = NoiseModel::additive(rng.random_range(0.05..0.5));
        let tags: Vec<usize> = (0..g.tag_count()).collect();
        let record = || InstanceRecord::new(&g, &c, &noise, Some(&set));

        let (_, field) = constrained_potential_gradient(&set, &g, &c, &noise, ConstraintKind::DistanceOnly, &tags)?;
        let field = apply_fault(opts.fault, field);
        let j_d = |cc: &Configuration| -> Result<f64> {
            let f_u = fim(&g, cc, &noise)?.tag_block();
            Ok(constrained_crlb(&f_u, &distance_nullspace(&set, cc)?).bound.trace())
        };
        worst_d.push(rel_err(&field.stacked(), &fd_gradient(j_d, &c, &tags, FD_STEP)?), record);

        let grad = apply_fault(opts.fault, rp_potential_gradient(&g, &c, &noise, &set, &tags)?).stacked();
        let q = orientation_dim(dim)?;
        let mut probe = set.clone();
        let (_, poses) = probe.project(&c)?;
        let mut an = Vec::new();
        let mut fd = Vec::new();
        for r in 0..set.groups.len() {
            for k in 0..dim + q {
                let eval = |eps: f64| -> Result<(f64, DVector<f64>)> {
                    let mut st = set.clone();
                    let mut cc = c.clone();
                    let mut ps: Vec<RigidPose> = poses.clone();
                    if k < dim {
                        ps[r].position[k] += eps;
                    } else {
                        ps[r].theta[k - dim] += eps;
                    }
                    st.write_poses(&mut cc, &ps)?;
                    Ok((rp_constrained_crlb(&g, &cc, &noise, &st)?.j_c, cc.head(g.tag_count())))
                };
                let (jp, xp) = eval(FD_STEP)?;
                let (jm, xm) = eval(-FD_STEP)?;
                fd.push((jp - jm) / (2.0 * FD_STEP));
                an.push(grad.dot(&((xp - xm) / (2.0 * FD_STEP))));
            }
        }
        worst_rp.push(rel_err(&DVector::from_vec(an), &DVector::from_vec(fd)), || {
            InstanceRecord::new(&g, &c, &noise, Some(&set))
        });
    }
    Ok(vec![worst_d.report("gradient J_c(D)", 1e-5), worst_rp.report("gradient J_c(RP) on-manifold", 1e-4)])
}

/// Distributed instances keep lambda_bar / lambda_min(F_U) below this, so
/// the Richardson solves finish in tens of thousands of rounds.
pub const MAX_DISTRIBUTED_CONDITION: f64 = 1e3;

fn distributed_instance(
    opts: &SuiteOptions,
    s: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(RangingGraph, Configuration, NoiseModel)> {
    let dim = 2 + s % 2;
    let anchors = dim + 1 + s % 2;
    let top = opts.max_distributed_nodes.saturating_sub(anchors).max(2);
    loop {
        // The first instance of each dimension uses the full size.
        let tags = if s < 2 { top } else { rng.random_range(2..=top) };
        let (g, c) = random_rigid_network(dim, anchors, tags, s % 3 != 2, rng)?;
        let noise = random_noise(rng);
        let mut net = RoundNetwork::with_mode(&g, TranscriptMode::CountOnly);
        let bound = degree_spectral_bound(&mut net, &c, &noise)?;
        let (vals, _) = linalg::sym_eigen_sorted(&fim(&g, &c, &noise)?.tag_block());
        if bound / vals[0] <= MAX_DISTRIBUTED_CONDITION {
            return Ok((g, c, noise));
        }
    }
}

/// Richardson step `eta_fraction * 2 / lambda_bar` from the max-consensus bound.
fn solver_options(
    net: &mut RoundNetwork,
    config: &Configuration,
    noise: &NoiseModel,
    settings: &DistributedSettings,
) -> Result<SolverOptions> {
    let bound = degree_spectral_bound(net, config, noise)?;
    let mut so = SolverOptions::new(settings.eta_fraction * 2.0 / bound);
    so.max_rounds = settings.max_rounds;
    so.tol = settings.tol;
    Ok(so)
}

/// Distributed D/A-opt gradients against the centralized ones, with the
/// locality audit of every transcript.
pub fn distributed_oracles(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let mut rng = rng_for(opts, 30);
    let cases: Vec<(RangingGraph, Configuration, NoiseModel)> =
        (0..opts.instances).map(|s| distributed_instance(opts, s, &mut rng)).collect::<Result<_>>()?;
    let results: Vec<Result<(f64, f64, usize)>> = cases
        .par_iter()
        .map(|(g, c, noise)| {
            let nodes: Vec<usize> = (0..g.node_count()).collect();
            let mut net = RoundNetwork::with_mode(g, TranscriptMode::Full);
            let so = solver_options(&mut net, c, noise, &opts.distributed)?;
            let d = apply_fault(opts.fault, distributed_dopt_gradient(&mut net, c, noise, &nodes, &so)?.field);
            let a = apply_fault(opts.fault, distributed_aopt_gradient(&mut net, c, noise, &nodes, &so)?.field);
            let d_ref = potential_gradient(PotentialKind::DOpt, g, c, noise, &nodes)?;
            let a_ref = potential_gradient(PotentialKind::AOpt, g, c, noise, &nodes)?;
            let violations = audit_locality(g, net.transcript()).len();
            Ok((rel_err(&d.stacked(), &d_ref.stacked()), rel_err(&a.stacked(), &a_ref.stacked()), violations))
        })
        .collect();
    let mut wd = Worst::new();
    let mut wa = Worst::new();
    let mut wl = Worst::new();
    for ((g, c, noise), r) in cases.iter().zip(results) {
        let (ed, ea, v) = r?;
        let rec = || InstanceRecord::new(g, c, noise, None);
        wd.push(ed, rec);
        wa.push(ea, rec);
        wl.push(v as f64, rec);
    }
    Ok(vec![
        wd.report("distributed D-opt gradient", 1e-5),
        wa.report("distributed A-opt gradient", 1e-5),
        wl.report("locality audit (D/A transcripts)", 1.0),
    ])
}

/// Rigid networks whose two smallest eigenvalues of F_U are separated by at
/// least `min_gap * lambda_bar`.
fn gapped_instances(
    opts: &SuiteOptions,
    suite: u64,
    count: usize,
    max_nodes: usize,
) -> Result<Vec<(RangingGraph, Configuration, NoiseModel, u64)>> {
    let mut rng = rng_for(opts, suite);
    let mut out = Vec::new();
    let mut s = 0;
    while out.len() < count {
        let dim = 2 + s % 2;
        s += 1;
        let anchors = dim + 2;
        let tags = rng.random_range(3..=max_nodes.saturating_sub(anchors).max(3));
        let (g, c) = random_rigid_network(dim, anchors, tags, true, &mut rng)?;
        let noise = NoiseModel::additive(1.0);
        let mut net = RoundNetwork::with_mode(&g, TranscriptMode::CountOnly);
        let bound = degree_spectral_bound(&mut net, &c, &noise)?;
        let (vals, _) = linalg::sym_eigen_sorted(&fim(&g, &c, &noise)?.tag_block());
        if (vals[1] - vals[0]) / bound >= opts.distributed.power.min_relative_gap {
            out.push((g, c, noise, rng.random()));
        }
    }
    Ok(out)
}

fn power_params(opts: &SuiteOptions, bound: f64) -> PowerIterParams {
    let mut p = PowerIterParams::from_bound(bound);
    let power = &opts.distributed.power;
    p.outer_iters = power.outer_iters;
    p.inner_rounds = power.inner_rounds;
    p.final_rounds = power.final_rounds;
    p
}

/// Power iteration against a dense eigensolver: relative eigenvalue error
/// and |v_hat^T v|.
pub fn power_iteration_accuracy(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let cases = gapped_instances(opts, 40, opts.power_instances, 14)?;
    let results: Vec<Result<(f64, f64)>> = cases
        .par_iter()
        .map(|(g, c, noise, seed)| {
            let mut net = RoundNetwork::with_mode(g, TranscriptMode::CountOnly);
            let bound = degree_spectral_bound(&mut net, c, noise)?;
            let est = power_iteration_eigvec(
                &mut net,
                c,
                noise,
                &power_params(opts, bound),
                &mut ChaCha8Rng::seed_from_u64(*seed),
            )?;
            let (vals, vecs) = linalg::sym_eigen_sorted(&fim(g, c, noise)?.tag_block());
            let align = est.stacked().dot(&vecs.column(0)).abs();
            Ok(((est.lambda - vals[0]).abs() / vals[0], align))
        })
        .collect();
    let mut wl = Worst::new();
    let mut wv = Worst::new();
    for ((g, c, noise, _), r) in cases.iter().zip(results) {
        let (el, align) = r?;
        wl.push(el, || InstanceRecord::new(g, c, noise, None));
        wv.push(1.0 - align, || InstanceRecord::new(g, c, noise, None));
    }
    let mut align = wv.report("power iteration eigenvector (1 - |v^T v|)", 1e-3);
    align.note = "alignment must exceed 0.999".into();
    Ok(vec![wl.report("power iteration eigenvalue", 1e-3), align])
}

/// Distributed E-opt gradient from the power-iteration estimate against the
/// centralized gradient, with the locality audit.
pub fn distributed_eopt_oracle(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let cases = gapped_instances(opts, 50, opts.power_instances, opts.max_distributed_nodes.min(14))?;
    let results: Vec<Result<(f64, usize)>> = cases
        .par_iter()
        .map(|(g, c, noise, seed)| {
            let nodes: Vec<usize> = (0..g.node_count()).collect();
            let mut net = RoundNetwork::with_mode(g, TranscriptMode::CountOnly);
            let bound = degree_spectral_bound(&mut net, c, noise)?;
            let est = power_iteration_eigvec(
                &mut net,
                c,
                noise,
                &power_params(opts, bound),
                &mut ChaCha8Rng::seed_from_u64(*seed),
            )?;
            let mut net = RoundNetwork::with_mode(g, TranscriptMode::Full);
            let e = apply_fault(opts.fault, distributed_eopt_gradient(&mut net, c, noise, &est, &nodes)?.field);
            let e_ref = potential_gradient(PotentialKind::EOpt, g, c, noise, &nodes)?;
            Ok((rel_err(&e.stacked(), &e_ref.stacked()), audit_locality(g, net.transcript()).len()))
        })
        .collect();
    let mut we = Worst::new();
    let mut wl = Worst::new();
    for ((g, c, noise, _), r) in cases.iter().zip(results) {
        let (err, v) = r?;
        we.push(err, || InstanceRecord::new(g, c, noise, None));
        wl.push(v as f64, || InstanceRecord::new(g, c, noise, None));
    }
    Ok(vec![we.report("distributed E-opt gradient", 1e-3), wl.report("locality audit (E transcripts)", 1.0)])
}

/// Eigenvalues of F_U^{-1} - B_D and B_D - B_RP (position block) at random
/// feasible one-robot configurations with two tags and three anchors.
/// Measured is minus the smallest eigenvalue.
pub fn psd_ordering(opts: &SuiteOptions) -> Result<PropertyReport> {
    use crate::constrained::RigidGroup;
    let mut rng = rng_for(opts, 60);
    let mut worst = Worst::new();
    let graph = build_graph(2, 2, 3, &[(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)])?;
    for _ in 0..opts.instances {
        let anchors: Vec<Vec<f64>> =
            (0..3).map(|_| vec![rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)]).collect();
        let theta = rng.random_range(-3.1..3.1);
        let group = RigidGroup::new(0, vec![0, 1], vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![theta]);
        let mut set = RigidBodySet::new(2, 2, vec![group])?;
        let mut pts = vec![vec![0.0, 0.0]; 2];
        pts.extend(anchors);
        let mut c = Configuration::from_points(2, &pts)?;
        let origin = vec![rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)];
        set.write_poses(&mut c, &[RigidPose::new(origin, vec![theta])])?;
        let noise = NoiseModel::additive(0.1);
        let f_u = fim(&graph, &c, &noise)?.tag_block();
        let free = crlb_unconstrained(&f_u, DEFAULT_PINV_TOL);
        let b_d = constrained_crlb(&f_u, &distance_nullspace(&set, &c)?).bound;
        let b_rp = rp_constrained_crlb(&graph, &c, &noise, &set)?.position_bound;
        let low = |m: DMatrix<f64>| linalg::sym_eigen_sorted(&linalg::symmetrize(&m)).0[0];
        let margin = low(&free.bound - &b_d).min(low(&b_d - &b_rp));
        worst.push(-margin, || InstanceRecord::new(&graph, &c, &noise, Some(&set)));
    }
    Ok(worst.report("PSD ordering F_U^-1 >= B_D >= B_RP", 1e-9))
}

/// tr(F_U) = sum_{i in U} |N_i| / sigma^2 for the additive model.
pub fn trace_identity(opts: &SuiteOptions) -> Result<PropertyReport> {
    let mut rng = rng_for(opts, 70);
    let mut worst = Worst::new();
    for s in 0..opts.instances {
        let dim = 2 + s % 2;
        let anchors = rng.random_range(2..=4);
        let tags = rng.random_range(1..=opts.max_nodes.saturating_sub(anchors).max(1));
        let (g, c) = random_framework(dim, tags, anchors, 0.6, &mut rng)?;
        let noise = NoiseModel::additive(rng.random_range(0.05..2.0));
        let tr = fim(&g, &c, &noise)?.tag_block().trace();
        let degree: usize = (0..g.tag_count()).map(|i| g.neighbors(i).len()).sum();
        let expected = degree as f64 / (noise.sigma * noise.sigma);
        worst.push((tr - expected).abs() / expected.max(f64::MIN_POSITIVE), || {
            InstanceRecord::new(&g, &c, &noise, None)
        });
    }
    Ok(worst.report("trace identity", 1e-12))
}

/// Every suite at the scale given by `opts`.
pub fn run_all(opts: &SuiteOptions) -> Result<Vec<PropertyReport>> {
    let mut out = vec![fim_rigidity_identity(opts)?, kernel_equivalence(opts)?, triangulation_invertibility(opts)?];
    out.extend(potential_gradient_checks(opts)?);
    out.extend(constrained_gradient_checks(opts)?);
    out.extend(distributed_oracles(opts)?);
    out.extend(distributed_eopt_oracle(opts)?);
    out.extend(power_iteration_accuracy(opts)?);
    out.push(psd_ordering(opts)?);
    out.push(trace_identity(opts)?);
    Ok(out)
}

/// Rebuilds an instance from a report and errors if it is malformed.
pub fn replay(record: &InstanceRecord) -> Result<(RangingGraph, Configuration)> {
    let (g, c) = record.rebuild()?;
    if c.len() != g.node_count() {
        return Err(Error::Dimension("instance points do not match the graph".into()));
    }
    Ok((g, c))
}
