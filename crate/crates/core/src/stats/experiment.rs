//! Monte Carlo experiments: configuration, trial loop, aggregation, report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize};

use super::{
    empirical_tv_to_poisson, joint_product_poisson_check, ks_normal_histogram, local_limit_check, Histogram,
    JointHistogram,
};
use crate::canonical::{ClassCatalog, MAX_ENUMERATION_SIZE};
use crate::cube::{eta_star, Params};
use crate::error::{Error, Result};
use crate::expectations::{exact_census_oracle, expected_class_count, mu3_coefficient_two, mu_exact};
use crate::numeric::{compensated_sum, fmt_sig};
use crate::par::{try_map_range, Execution};
use crate::sampler::{
    ball_cluster_statistic, component_census_capped, fragment_distance_profile, goodness_diagnostic, CensusRecord,
    DistanceSummary, SampleSpec, TrialChecks, DEFAULT_FRAGMENT_STORE_CAP, DEFAULT_MAX_CENSUS_DIM,
};

/// Trials handed to the workers at a time; results are folded in trial order.
const CHUNK: usize = 1024;

/// Half-width of the local-limit window in units of `sqrt(mu)`.
pub const LOCAL_LIMIT_C: f64 = 1.0;

/// Largest dimension for which the census law is compared with the exact oracle.
const ORACLE_DIM: u32 = 3;

const ETA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Poisson,
    Normal,
    Joint,
    LocalLimit,
    Distance,
    Clustering,
    Goodness,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Poisson,
        Check::Normal,
        Check::Joint,
        Check::LocalLimit,
        Check::Distance,
        Check::Clustering,
        Check::Goodness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Poisson => "poisson",
            Check::Normal => "normal",
            Check::Joint => "joint",
            Check::LocalLimit => "local-limit",
            Check::Distance => "distance",
            Check::Clustering => "clustering",
            Check::Goodness => "goodness",
        }
    }

    pub fn parse(s: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == s)
    }
}

fn p_text<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Text {
        S(String),
        F(f64),
    }
    Ok(match Text::deserialize(d)? {
        Text::S(s) => s,
        Text::F(f) => format!("{f}"),
    })
}

fn default_class_cap() -> usize {
    3
}
fn default_store_cap() -> usize {
    DEFAULT_FRAGMENT_STORE_CAP
}
fn default_gamma() -> f64 {
    3.0
}
fn default_radius_frac() -> f64 {
    0.05
}
fn default_distance_offset() -> f64 {
    0.03
}
fn default_max_dim() -> u32 {
    DEFAULT_MAX_CENSUS_DIM
}

/// Everything that determines a report. The JSON form mirrors the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: u32,
    /// Further dimensions for trend runs; `d` always comes first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_list: Vec<u32>,
    /// Edge probability as written, parsed exactly.
    #[serde(deserialize_with = "p_text")]
    pub p: String,
    pub trials: u64,
    pub seed: u64,
    /// Largest component size tallied per class.
    #[serde(default = "default_class_cap")]
    pub class_cap: usize,
    #[serde(default = "default_store_cap")]
    pub store_cap: usize,
    /// Class ids for the joint check.
    #[serde(default)]
    pub classes: Vec<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Ball radius as a fraction of `d`.
    #[serde(default = "default_radius_frac")]
    pub radius_frac: f64,
    /// Near-fragment radius is `floor((eta* - distance_offset) d)`.
    #[serde(default = "default_distance_offset")]
    pub distance_offset: f64,
    #[serde(default = "default_max_dim")]
    pub max_dim: u32,
    #[serde(default)]
    pub checks: BTreeSet<Check>,
}

impl ExperimentConfig {
    pub fn new(d: u32, p: &str, trials: u64, seed: u64) -> Self {
        Self {
            d,
            d_list: Vec::new(),
            p: p.to_string(),
            trials,
            seed,
            class_cap: default_class_cap(),
            store_cap: default_store_cap(),
            classes: Vec::new(),
            gamma: default_gamma(),
            radius_frac: default_radius_frac(),
            distance_offset: default_distance_offset(),
            max_dim: default_max_dim(),
            checks: BTreeSet::new(),
        }
    }

    pub fn with_checks(mut self, checks: impl IntoIterator<Item = Check>) -> Self {
        self.checks.extend(checks);
        self
    }

    /// `d` followed by the distinct extra dimensions, in the given order.
    pub fn dimensions(&self) -> Vec<u32> {
        let mut dims = vec![self.d];
        for &d in &self.d_list {
            if !dims.contains(&d) {
                dims.push(d);
            }
        }
        dims
    }

    pub fn has(&self, check: Check) -> bool {
        self.checks.contains(&check)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Invalid("trials must be at least 1".into()));
        }
        if self.max_dim > crate::cube::MAX_DIM {
            return Err(Error::Invalid(format!("max_dim {} too large", self.max_dim)));
        }
        for d in self.dimensions() {
            Params::from_decimal(d, &self.p)?;
            if d > self.max_dim {
                return Err(Error::Cap { what: "census dimension", value: d as u64, cap: self.max_dim as u64 });
            }
        }
        if self.class_cap == 0 || self.class_cap > MAX_ENUMERATION_SIZE {
            return Err(Error::Invalid(format!("class_cap must lie in 1..={MAX_ENUMERATION_SIZE}")));
        }
        if self.store_cap < self.class_cap {
            return Err(Error::Invalid("store_cap must be at least class_cap".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Invalid(format!("gamma {} must be non-negative", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.radius_frac) {
            return Err(Error::Invalid(format!("radius_frac {} outside [0, 1]", self.radius_frac)));
        }
        if !(0.0..0.5).contains(&self.distance_offset) {
            return Err(Error::Invalid(format!("distance_offset {} outside [0, 0.5)", self.distance_offset)));
        }
        if self.has(Check::Joint) {
            let catalog = ClassCatalog::new(self.class_cap)?;
            if self.classes.len() < 2 {
                return Err(Error::Invalid("the joint check needs at least two class ids".into()));
            }
            if let Some(&bad) = self.classes.iter().find(|&&id| catalog.get(id).is_none()) {
                return Err(Error::Invalid(format!(
                    "class id {bad} unknown for class_cap {} ({} classes)",
                    self.class_cap,
                    catalog.forms().len()
                )));
            }
            let distinct: BTreeSet<_> = self.classes.iter().collect();
            if distinct.len() != self.classes.len() {
                return Err(Error::Invalid("class ids must be distinct".into()));
            }
        }
        Ok(())
    }

    fn params(&self, d: u32) -> Result<Params> {
        Params::from_decimal(d, &self.p)
    }

    pub fn near_radius(&self, d: u32, p: f64) -> Result<u32> {
        let eta = eta_star(p, ETA_TOL)?;
        Ok(((eta - self.distance_offset) * d as f64).floor().max(0.0) as u32)
    }

    pub fn ball_radius(&self, d: u32) -> u32 {
        (self.radius_frac * d as f64).floor() as u32
    }
}

/// One sampled graph, reduced to a record plus any requested checks.
pub fn run_trial(config: &ExperimentConfig, catalog: &ClassCatalog, d: u32, trial: u64) -> Result<CensusRecord> {
    let params = config.params(d)?;
    let spec = SampleSpec::new(&params, config.seed, trial);
    let census = component_census_capped(&spec, config.store_cap, config.max_dim)?;
    let mut record = census.to_record(catalog);
    let mut checks = TrialChecks::default();
    let mut any = false;
    if config.has(Check::Distance) {
        let near_radius = config.near_radius(d, params.p())?;
        let profile = fragment_distance_profile(&census, &spec);
        checks.distance = Some(DistanceSummary {
            near_radius,
            near_count: profile.within(near_radius),
            max_distance: profile.max_distance(),
        });
        any = true;
    }
    if config.has(Check::Goodness) {
        checks.goodness = Some(goodness_diagnostic(&census, &spec, config.gamma));
        any = true;
    }
    if config.has(Check::Clustering) {
        checks.clustering = ball_cluster_statistic(&census, config.ball_radius(d)).ok();
        any = true;
    }
    if any {
        record.checks = Some(checks);
    }
    Ok(record)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistanceAggregate {
    pub near_radius: u32,
    /// Per-trial number of vertices within `near_radius` of the fragment.
    pub near_count: Histogram,
    pub max_distance: Histogram,
    pub empty_fragment_trials: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GoodnessAggregate {
    pub n_gamma: Option<u64>,
    pub all_good_in_giant_trials: u64,
    pub l2_within_n_gamma_trials: u64,
    pub bad_vertices: Histogram,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterAggregate {
    pub radius: u32,
    pub within_radius: Histogram,
    pub within_double_radius: Histogram,
    /// Trials whose fragment was not stored in full or was too large to scan.
    pub skipped_trials: u64,
}

/// Sufficient statistics of all trials at one dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawAggregates {
    pub trials: u64,
    #[serde(rename = "X")]
    pub x: Histogram,
    #[serde(rename = "Z")]
    pub z: Histogram,
    #[serde(rename = "L2")]
    pub l2: Histogram,
    /// `t -> law of X_t` for `t <= class_cap`.
    pub x_t: BTreeMap<u64, Histogram>,
    /// Class id -> law of `Y`.
    pub y: BTreeMap<usize, Histogram>,
    pub unclassified: u64,
    pub oversize: u64,
    /// Joint law of `(X_1, ..., X_{2^d})`, kept for oracle-sized cubes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_vectors: Option<JointHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<JointHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goodness: Option<GoodnessAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusterAggregate>,
}

impl RawAggregates {
    fn new(config: &ExperimentConfig, catalog: &ClassCatalog, d: u32) -> Result<Self> {
        let p = config.params(d)?.p();
        Ok(Self {
            x_t: (1..=config.class_cap as u64).map(|t| (t, Histogram::new())).collect(),
            y: (0..catalog.forms().len()).map(|id| (id, Histogram::new())).collect(),
            size_vectors: (d <= ORACLE_DIM).then(JointHistogram::default),
            joint: config.has(Check::Joint).then(JointHistogram::default),
            distance: config
                .has(Check::Distance)
                .then(|| -> Result<_> {
                    Ok(DistanceAggregate { near_radius: config.near_radius(d, p)?, ..Default::default() })
                })
                .transpose()?,
            goodness: config.has(Check::Goodness).then(|| GoodnessAggregate {
                n_gamma: Some((16.0 * (1.0 + config.gamma) / p).floor() as u64),
                ..Default::default()
            }),
            clustering: config
                .has(Check::Clustering)
                .then(|| ClusterAggregate { radius: config.ball_radius(d), ..Default::default() }),
            ..Default::default()
        })
    }

    /// Folds one census record in.
    pub fn add(&mut self, config: &ExperimentConfig, record: &CensusRecord) -> Result<()> {
        self.trials += 1;
        self.x.add(record.x);
        self.z.add(record.z);
        self.l2.add(record.l2);
        for (&t, h) in self.x_t.iter_mut() {
            h.add(record.sizes_histogram.get(&t).copied().unwrap_or(0));
        }
        let classes: BTreeMap<usize, u64> = record.classes.iter().map(|c| (c.form_id, c.count)).collect();
        for (id, h) in self.y.iter_mut() {
            h.add(classes.get(id).copied().unwrap_or(0));
        }
        self.unclassified += record.unclassified;
        self.oversize += record.oversize;
        if let Some(sv) = self.size_vectors.as_mut() {
            let n = 1u64 << record.d;
            sv.add((1..=n).map(|t| record.sizes_histogram.get(&t).copied().unwrap_or(0)).collect());
        }
        if let Some(j) = self.joint.as_mut() {
            j.add(config.classes.iter().map(|id| classes.get(id).copied().unwrap_or(0)).collect());
        }
        let checks = record.checks.as_ref();
        let missing =
            |what: &str| Error::Invalid(format!("census record of trial {} lacks the {what} check", record.trial));
        if let Some(agg) = self.distance.as_mut() {
            let dist = checks.and_then(|c| c.distance.as_ref()).ok_or_else(|| missing("distance"))?;
            agg.near_count.add(dist.near_count);
            match dist.max_distance {
                Some(m) => agg.max_distance.add(m as u64),
                None => agg.empty_fragment_trials += 1,
            }
        }
        if let Some(agg) = self.goodness.as_mut() {
            let good = checks.and_then(|c| c.goodness.as_ref()).ok_or_else(|| missing("goodness"))?;
            agg.all_good_in_giant_trials += good.good_vertices_all_in_giant as u64;
            agg.l2_within_n_gamma_trials += good.l2_within_n_gamma as u64;
            agg.bad_vertices.add(good.bad_vertex_count);
        }
        if let Some(agg) = self.clustering.as_mut() {
            match checks.and_then(|c| c.clustering.as_ref()) {
                Some(b) => {
                    agg.within_radius.add(b.within_radius_max);
                    agg.within_double_radius.add(b.within_double_radius_max);
                }
                None => agg.skipped_trials += 1,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTheory {
    pub form_id: usize,
    pub size: usize,
    pub span: u32,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theory {
    pub m_p: u64,
    pub eta_star: f64,
    /// `[mu_1, mu_2, mu_3]`.
    pub mu: Vec<f64>,
    /// `mu_3` with coefficient 2, printed for comparison.
    pub mu3_coefficient_two: f64,
    pub classes: Vec<ClassTheory>,
}

impl Theory {
    pub fn compute(params: &Params, catalog: &ClassCatalog) -> Result<Self> {
        let (d, p) = (params.d(), params.p());
        let mut classes = Vec::new();
        for (form_id, form) in catalog.forms().iter().enumerate() {
            classes.push(ClassTheory {
                form_id,
                size: form.size(),
                span: form.span(),
                expected: expected_class_count(form, d, p)?,
            });
        }
        Ok(Self {
            m_p: params.m_p(),
            eta_star: eta_star(p, ETA_TOL)?,
            mu: (1..=3).map(|t| mu_exact(t, d, p)).collect::<Result<_>>()?,
            mu3_coefficient_two: mu3_coefficient_two(d, p)?,
            classes,
        })
    }

    /// `E[X_t]` as the sum over classes of size `t`.
    pub fn mu_t(&self, t: usize) -> f64 {
        compensated_sum(self.classes.iter().filter(|c| c.size == t).map(|c| c.expected))
    }
}

/// One line of the report. Empty fields are statistics that could not be formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub block: String,
    pub statistic: String,
    pub n: u64,
    pub value: Option<f64>,
    pub std_error: Option<f64>,
    pub theory: Option<f64>,
}

impl StatRow {
    pub fn id(&self) -> String {
        format!("{}/{}", self.block, self.statistic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionBlock {
    pub d: u32,
    pub raw: RawAggregates,
    pub theory: Theory,
    pub rows: Vec<StatRow>,
    pub notes: Vec<String>,
}

/// Statistic id -> `[lo, hi]`.
pub type Envelope = BTreeMap<String, [f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub id: String,
    pub lo: f64,
    pub hi: f64,
    pub value: Option<f64>,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub blocks: Vec<DimensionBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<Vec<EnvelopeCheck>>,
}

pub fn block_name(d: u32) -> String {
    format!("d{d}")
}

struct Rows<'a> {
    block: &'a str,
    rows: Vec<StatRow>,
}

impl Rows<'_> {
    fn push(&mut self, statistic: impl Into<String>, n: u64, value: Option<f64>, se: Option<f64>, theory: Option<f64>) {
        self.rows.push(StatRow {
            block: self.block.to_string(),
            statistic: statistic.into(),
            n,
            value,
            std_error: se,
            theory,
        });
    }

    /// Mean and sample variance of a histogram.
    fn moments(&mut self, name: &str, h: &Histogram, theory_mean: Option<f64>) {
        let n = h.n();
        self.push(format!("{name}.mean"), n, h.mean(), h.std_error(), theory_mean);
        self.push(format!("{name}.variance"), n, h.variance(), None, None);
    }
}

fn derive_block(
    config: &ExperimentConfig,
    catalog: &ClassCatalog,
    d: u32,
    raw: &RawAggregates,
) -> Result<(Theory, Vec<StatRow>, Vec<String>)> {
    let params = config.params(d)?;
    let theory = Theory::compute(&params, catalog)?;
    let block = block_name(d);
    let mut out = Rows { block: &block, rows: Vec::new() };
    let mut notes = Vec::new();
    let n = raw.trials;
    let mu1 = theory.mu[0];

    out.push("m_p", 0, None, None, Some(theory.m_p as f64));
    out.push("eta_star", 0, None, None, Some(theory.eta_star));
    out.push("mu3_coefficient_two", 0, None, None, Some(theory.mu3_coefficient_two));
    out.moments("X", &raw.x, None);
    out.moments("Z", &raw.z, None);
    let (mx, mz) = (raw.x.mean(), raw.z.mean());
    out.push("Z_minus_X.mean_over_mu1", n, mx.zip(mz).map(|(x, z)| (z - x) / mu1), None, Some(0.0));
    for (&t, h) in &raw.x_t {
        let mu_t = theory.mu_t(t as usize);
        let name = format!("X_{t}");
        out.moments(&name, h, Some(mu_t));
        out.push(format!("{name}.variance_over_mu"), n, h.variance().map(|v| v / mu_t), None, Some(1.0));
    }
    for (&id, h) in &raw.y {
        out.push(format!("Y{id}.mean"), n, h.mean(), h.std_error(), Some(theory.classes[id].expected));
    }
    let m_p = theory.m_p;
    let (f, se) = raw.l2.fraction(|x| x == m_p).unzip();
    out.push("L2.eq_m_p_fraction", n, f, se, Some(1.0));
    out.push("L2.max", n, raw.l2.max().map(|x| x as f64), None, Some(m_p as f64));
    out.push("oversize_components", n, Some(raw.oversize as f64), None, None);

    if let Some(sv) = &raw.size_vectors {
        let oracle = exact_census_oracle(d, params.p())?.size_counts_law();
        let mut diffs = Vec::new();
        let nf = sv.n() as f64;
        for (k, &c) in &sv.0 {
            diffs.push((c as f64 / nf - oracle.probability(k)).abs());
        }
        for (k, &pr) in &oracle.probabilities {
            if !sv.0.contains_key(k) {
                diffs.push(pr);
            }
        }
        let bias = (oracle.probabilities.len() as f64 / nf).sqrt() / 2.0;
        out.push("census_law.tv_oracle", n, Some(0.5 * compensated_sum(diffs)), Some(bias), Some(0.0));
    }

    if config.has(Check::Poisson) {
        for (&t, h) in &raw.x_t {
            let lambda = theory.mu_t(t as usize);
            match empirical_tv_to_poisson(h, lambda) {
                Ok(tv) => out.push(format!("X_{t}.tv_poisson"), n, Some(tv.tv), Some(tv.bias_bound), Some(0.0)),
                Err(e) => notes.push(format!("X_{t}.tv_poisson: {e}")),
            }
        }
        for (&id, h) in &raw.y {
            match empirical_tv_to_poisson(h, theory.classes[id].expected) {
                Ok(tv) => out.push(format!("Y{id}.tv_poisson"), n, Some(tv.tv), Some(tv.bias_bound), Some(0.0)),
                Err(e) => notes.push(format!("Y{id}.tv_poisson: {e}")),
            }
        }
    }
    if config.has(Check::Normal) {
        for (&t, h) in &raw.x_t {
            let res = match (h.mean(), h.variance()) {
                (Some(m), Some(v)) => ks_normal_histogram(h, m, v.sqrt()),
                _ => Err(Error::Undersized("fewer than two trials".into())),
            };
            match res {
                Ok(ks) => out.push(format!("X_{t}.ks_normal"), n, Some(ks), None, Some(0.0)),
                Err(e) => notes.push(format!("X_{t}.ks_normal: {e}")),
            }
        }
    }
    if config.has(Check::LocalLimit) {
        for (&t, h) in &raw.x_t {
            match local_limit_check(h, theory.mu_t(t as usize), LOCAL_LIMIT_C) {
                Ok(ll) => {
                    out.push(format!("X_{t}.local_limit"), n, Some(ll.max_deviation), Some(ll.std_error), Some(0.0))
                }
                Err(e) => notes.push(format!("X_{t}.local_limit: {e}")),
            }
        }
    }
    if let Some(joint) = &raw.joint {
        let lambdas: Vec<f64> = config.classes.iter().map(|&id| theory.classes[id].expected).collect();
        match joint_product_poisson_check(joint, &lambdas) {
            Ok(check) => {
                out.push("joint.tv_product_poisson", n, Some(check.tv), Some(check.bias_bound), Some(0.0));
                for pc in &check.correlations {
                    let (a, b) = (config.classes[pc.a], config.classes[pc.b]);
                    out.push(
                        format!("joint.corr_Y{a}_Y{b}"),
                        n,
                        pc.correlation,
                        Some(1.0 / (n as f64).sqrt()),
                        Some(0.0),
                    );
                }
            }
            Err(e) => notes.push(format!("joint: {e}")),
        }
    }
    if let Some(agg) = &raw.distance {
        let size = params.num_vertices() as f64;
        let frac_mean = agg.near_count.mean().map(|m| m / size);
        let frac_se = agg.near_count.std_error().map(|s| s / size);
        out.push("distance.near_radius", n, Some(agg.near_radius as f64), None, None);
        out.push("distance.near_fraction", n, frac_mean, frac_se, None);
        let eta_d = theory.eta_star * d as f64;
        let md = &agg.max_distance;
        out.push("distance.max.mean", md.n(), md.mean(), md.std_error(), Some(eta_d));
        out.push("distance.max.min", md.n(), md.min().map(|x| x as f64), None, Some(eta_d));
        out.push("distance.max.max", md.n(), md.max().map(|x| x as f64), None, Some(eta_d));
        out.push("distance.empty_fragment_trials", n, Some(agg.empty_fragment_trials as f64), None, None);
    }
    if let Some(agg) = &raw.goodness {
        let frac = |k: u64| k as f64 / n as f64;
        out.push("goodness.n_gamma", n, agg.n_gamma.map(|x| x as f64), None, None);
        out.push("goodness.all_good_in_giant_fraction", n, Some(frac(agg.all_good_in_giant_trials)), None, Some(1.0));
        out.push("goodness.l2_within_n_gamma_fraction", n, Some(frac(agg.l2_within_n_gamma_trials)), None, Some(1.0));
        out.moments("goodness.bad_vertices", &agg.bad_vertices, None);
    }
    if let Some(agg) = &raw.clustering {
        let h = &agg.within_radius;
        let (f, se) = h.fraction(|x| x <= m_p).unzip();
        out.push("cluster.radius", n, Some(agg.radius as f64), None, None);
        out.push("cluster.within_radius_le_m_p_fraction", h.n(), f, se, Some(1.0));
        out.push("cluster.within_radius.max", h.n(), h.max().map(|x| x as f64), None, Some(m_p as f64));
        let h2 = &agg.within_double_radius;
        out.push("cluster.within_double_radius.max", h2.n(), h2.max().map(|x| x as f64), None, None);
        out.push("cluster.skipped_trials", n, Some(agg.skipped_trials as f64), None, None);
    }
    Ok((theory, out.rows, notes))
}

/// Runs every trial of `config`, handing each census record to `sink` in
/// trial order.
pub fn run_experiment_with_sink(
    config: &ExperimentConfig,
    exec: Execution,
    mut sink: impl FnMut(&CensusRecord) -> Result<()>,
) -> Result<SummaryReport> {
    config.validate()?;
    let catalog = ClassCatalog::new(config.class_cap)?;
    let mut blocks = Vec::new();
    for d in config.dimensions() {
        let mut raw = RawAggregates::new(config, &catalog, d)?;
        let mut start = 0u64;
        while start < config.trials {
            let len = (config.trials - start).min(CHUNK as u64) as usize;
            let records = try_map_range(len, exec, |i| run_trial(config, &catalog, d, start + i as u64))?;
            for record in &records {
                sink(record)?;
                raw.add(config, record)?;
            }
            start += len as u64;
        }
        let (theory, rows, notes) = derive_block(config, &catalog, d, &raw)?;
        blocks.push(DimensionBlock { d, raw, theory, rows, notes });
    }
    Ok(SummaryReport { version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone(), blocks, envelope: None })
}

pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<SummaryReport> {
    run_experiment_with_sink(config, exec, |_| Ok(()))
}

/// Rebuilds a report from stored census records.
pub fn report_from_records(config: &ExperimentConfig, records: &[CensusRecord]) -> Result<SummaryReport> {
    config.validate()?;
    let catalog = ClassCatalog::new(config.class_cap)?;
    let mut blocks = Vec::new();
    for d in config.dimensions() {
        let mut raw = RawAggregates::new(config, &catalog, d)?;
        for record in records.iter().filter(|r| r.d == d) {
            raw.add(config, record)?;
        }
        if raw.trials == 0 {
            return Err(Error::Empty("census records for a configured dimension"));
        }
        let (theory, rows, notes) = derive_block(config, &catalog, d, &raw)?;
        blocks.push(DimensionBlock { d, raw, theory, rows, notes });
    }
    Ok(SummaryReport { version: env!("CARGO_PKG_VERSION").to_string(), config: config.clone(), blocks, envelope: None })
}

impl SummaryReport {
    /// Recomputes theory, rows, notes and envelope verdicts from the stored
    /// configuration and aggregates.
    pub fn recompute(&self) -> Result<SummaryReport> {
        self.config.validate()?;
        let catalog = ClassCatalog::new(self.config.class_cap)?;
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let (theory, rows, notes) = derive_block(&self.config, &catalog, b.d, &b.raw)?;
            blocks.push(DimensionBlock { d: b.d, raw: b.raw.clone(), theory, rows, notes });
        }
        let mut out = SummaryReport { blocks, envelope: None, ..self.clone() };
        if let Some(checks) = &self.envelope {
            let env: Envelope = checks.iter().map(|c| (c.id.clone(), [c.lo, c.hi])).collect();
            out.apply_envelope(&env);
        }
        Ok(out)
    }

    pub fn rows(&self) -> impl Iterator<Item = &StatRow> {
        self.blocks.iter().flat_map(|b| b.rows.iter())
    }

    pub fn row(&self, d: u32, statistic: &str) -> Option<&StatRow> {
        let block = block_name(d);
        self.rows().find(|r| r.block == block && r.statistic == statistic)
    }

    pub fn value(&self, d: u32, statistic: &str) -> Option<f64> {
        self.row(d, statistic).and_then(|r| r.value)
    }

    pub fn block(&self, d: u32) -> Option<&DimensionBlock> {
        self.blocks.iter().find(|b| b.d == d)
    }

    /// Checks every envelope entry whose statistic appears in the report.
    pub fn apply_envelope(&mut self, envelope: &Envelope) {
        let rows: BTreeMap<String, Option<f64>> = self.rows().map(|r| (r.id(), r.value)).collect();
        let checks = envelope
            .iter()
            .filter_map(|(id, &[lo, hi])| {
                let value = *rows.get(id)?;
                let inside = value.is_some_and(|v| lo <= v && v <= hi);
                Some(EnvelopeCheck { id: id.clone(), lo, hi, value, inside })
            })
            .collect();
        self.envelope = Some(checks);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Invalid(format!("report JSON: {e}")))
    }

    /// One row per statistic: `block,statistic,n,value,std_error,theory`.
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
        let mut s = String::from("block,statistic,n,value,std_error,theory\n");
        for r in self.rows() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.block,
                r.statistic,
                r.n,
                opt(r.value),
                opt(r.std_error),
                opt(r.theory)
            );
        }
        s
    }
}
