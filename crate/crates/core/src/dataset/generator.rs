//! Calibrated synthetic bond generator.
//!
//! Marginals follow the published summary statistics (default prevalence,
//! spread mean and dispersion, description length, token skew). Defaults
//! are drawn through a logistic link over a planted latent score made of
//! interactions that different model families can or cannot represent:
//!
//! * description theme x state group (only recoverable from the text
//!   embedding combined with geography),
//! * duration x short-rate regime (a non-additive "terms" pattern),
//! * non-disclosure of the repayment source,
//! * a small additive term (coupon, growth, seniority disclosure).
//!
//! The intercept is solved by bisection so the expected prevalence equals
//! the configured rate, and labels are drawn by systematic sampling so the
//! realised count matches it to within one.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::macro_series::MacroSeries;
use super::record::{BondRecord, MacroSnapshot, Rating, UNDISCLOSED};
use crate::error::{Error, Result};
use crate::rng;

pub const STATES: [&str; 50] = [
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL", "IN", "IA", "KS",
    "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM", "NY",
    "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV",
    "WI", "WY",
];

const USES: [(&str, f64, [&str; 3]); 12] = [
    ("general_purpose", 0.16, ["improvements", "capital", "facilities"]),
    ("school", 0.18, ["classroom", "campus", "education"]),
    ("water", 0.09, ["water", "treatment", "reservoir"]),
    ("sewer", 0.07, ["sewer", "wastewater", "sanitary"]),
    ("transportation", 0.08, ["highway", "bridge", "transit"]),
    ("housing", 0.08, ["housing", "multifamily", "residential"]),
    ("hospital", 0.06, ["hospital", "medical", "health"]),
    ("utility", 0.06, ["electric", "power", "utility"]),
    ("public_safety", 0.05, ["police", "fire", "safety"]),
    ("recreation", 0.04, ["park", "recreation", "stadium"]),
    ("industrial_development", 0.04, ["industrial", "economic", "development"]),
    ("refunding", 0.09, ["refund", "outstanding", "prior"]),
];

const SOURCES: [&str; 5] = [
    "general_obligation",
    "revenue",
    "special_assessment",
    "lease",
    "tax_increment",
];
const SOURCE_WEIGHTS: [f64; 5] = [0.40, 0.35, 0.10, 0.08, 0.07];

const SENIORITY: [&str; 2] = ["senior", "subordinate"];
const SENIORITY_WEIGHTS: [f64; 2] = [0.85, 0.15];

const CALLS: [(&str, f64); 3] = [
    ("non_callable", 0.35),
    ("callable", 0.55),
    ("sinking_fund", 0.10),
];

const TAX: [(&str, f64); 3] = [("tax_exempt", 0.82), ("taxable", 0.14), ("amt", 0.04)];

const HEAD_TOKENS: [&str; 10] = [
    "revenue",
    "bonds",
    "series",
    "general",
    "obligation",
    "school",
    "district",
    "refunding",
    "county",
    "city",
];

const TAIL_WORDS: [&str; 60] = [
    "authority", "project", "improvement", "public", "finance", "corporation", "issue", "tax",
    "exempt", "limited", "unlimited", "payable", "pledged", "lien", "notes", "certificates",
    "participation", "municipal", "board", "commission", "agency", "trust", "construction",
    "acquisition", "equipment", "renovation", "expansion", "system", "airport", "port", "library",
    "courthouse", "jail", "convention", "center", "infrastructure", "stormwater", "drainage",
    "levee", "flood", "broadband", "energy", "solar", "gas", "waste", "landfill", "roads",
    "streets", "sidewalks", "lighting", "parking", "garage", "dormitory", "university", "college",
    "community", "township", "village", "borough", "parish",
];

const THEME_A: [&str; 6] = [
    "shortfall",
    "deficiency",
    "moratorium",
    "forbearance",
    "arrears",
    "deferral",
];
const THEME_B: [&str; 6] = [
    "speculative",
    "startup",
    "unproven",
    "greenfield",
    "developer",
    "venture",
];

/// Planted structure that links features to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedSignal {
    /// Probability a description carries each of the two distress themes.
    pub theme_rate: f64,
    /// Distinct tokens in each theme vocabulary.
    pub theme_group_size: usize,
    /// Theme tokens inserted into a themed description.
    pub theme_mentions: usize,
    /// States paired with each theme.
    pub risky_states: usize,
    /// Duration (years) separating short and long maturities in the terms pattern.
    pub duration_pivot: f64,
    /// Short rate separating low and high rate regimes in the terms pattern.
    pub tbill_pivot: f64,
    /// Probability the repayment source is undisclosed.
    pub undisclosed_rate: f64,
    pub token_state_weight: f64,
    pub terms_weight: f64,
    pub disclosure_weight: f64,
    pub linear_weight: f64,
}

impl Default for PlantedSignal {
    fn default() -> Self {
        PlantedSignal {
            theme_rate: 0.25,
            theme_group_size: 3,
            theme_mentions: 2,
            risky_states: 5,
            duration_pivot: 10.0,
            tbill_pivot: 0.025,
            undisclosed_rate: 0.08,
            token_state_weight: 1.0,
            terms_weight: 1.0,
            disclosure_weight: 1.0,
            linear_weight: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_records: usize,
    pub default_rate: f64,
    pub spread_mean: f64,
    pub spread_std: f64,
    pub desc_len_mean: f64,
    pub desc_len_std: f64,
    pub vocab_head: usize,
    pub vocab_tail: usize,
    pub signal_strength: f64,
    pub seed: u64,
    /// Share of bonds whose spread sits in a narrow band around zero.
    pub near_zero_spread_fraction: f64,
    /// Upward spread shift applied to defaulters.
    pub default_spread_shift: f64,
    /// Probability a defaulter carries a C-or-below rating.
    pub rating_default_grade_defaulted: f64,
    /// Probability a non-defaulter carries a C-or-below rating.
    pub rating_default_grade_performing: f64,
    pub planted: PlantedSignal,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_records: 100_000,
            default_rate: 0.001,
            spread_mean: 0.0125,
            spread_std: 0.016,
            desc_len_mean: 28.0,
            desc_len_std: 15.0,
            vocab_head: 10,
            vocab_tail: 2_000,
            signal_strength: 4.0,
            seed: 0,
            near_zero_spread_fraction: 0.25,
            default_spread_shift: 0.025,
            rating_default_grade_defaulted: 0.24,
            rating_default_grade_performing: 0.000_07,
            planted: PlantedSignal::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.planted;
        if !(self.default_rate > 0.0 && self.default_rate < 1.0) {
            return Err(Error::config("default_rate must lie in (0, 1)"));
        }
        if !(self.spread_std > 0.0) || !self.spread_mean.is_finite() {
            return Err(Error::config("spread_std must be positive"));
        }
        if !(self.signal_strength >= 0.0) || !self.signal_strength.is_finite() {
            return Err(Error::config("signal_strength must be non-negative"));
        }
        if !(self.desc_len_mean >= 1.0 && self.desc_len_std > 0.0) {
            return Err(Error::config("description length mean must be >= 1 and std > 0"));
        }
        if self.vocab_head == 0 || self.vocab_tail == 0 {
            return Err(Error::config("vocabulary sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.near_zero_spread_fraction) {
            return Err(Error::config("near_zero_spread_fraction must lie in [0, 1)"));
        }
        for (name, v) in [
            ("rating_default_grade_defaulted", self.rating_default_grade_defaulted),
            ("rating_default_grade_performing", self.rating_default_grade_performing),
            ("planted.undisclosed_rate", p.undisclosed_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(0.0..=0.5).contains(&p.theme_rate) {
            return Err(Error::config("planted.theme_rate must lie in [0, 0.5]"));
        }
        if p.theme_group_size == 0 || p.theme_group_size > THEME_A.len() {
            return Err(Error::config(format!(
                "planted.theme_group_size must lie in 1..={}",
                THEME_A.len()
            )));
        }
        if p.risky_states == 0 || p.risky_states > 10 {
            return Err(Error::config("planted.risky_states must lie in 1..=10"));
        }
        if !(p.duration_pivot > 0.0) {
            return Err(Error::config("planted.duration_pivot must be positive"));
        }
        self.spread_mixture()?;
        if (self.n_records as f64) * self.default_rate < 10.0 {
            return Err(Error::config(format!(
                "too few expected positives: {} records at rate {} gives {:.2}",
                self.n_records,
                self.default_rate,
                self.n_records as f64 * self.default_rate
            )));
        }
        Ok(())
    }

    /// (near-zero mean, near-zero std, gamma shape, gamma scale) matching the
    /// configured overall spread mean and standard deviation.
    fn spread_mixture(&self) -> Result<(f64, f64, f64, f64)> {
        let f = self.near_zero_spread_fraction;
        let (m0, s0) = (0.0005, 0.0005);
        let m1 = (self.spread_mean - f * m0) / (1.0 - f);
        let second = self.spread_std.powi(2) + self.spread_mean.powi(2);
        let v1 = (second - f * (m0 * m0 + s0 * s0)) / (1.0 - f) - m1 * m1;
        if !(m1 > 0.0 && v1 > 0.0) {
            return Err(Error::config(
                "spread mean/std incompatible with the near-zero spread fraction",
            ));
        }
        Ok((m0, s0, m1 * m1 / v1, v1 / m1))
    }

    /// The two state groups paired with the description themes.
    pub fn risky_state_groups(&self) -> (Vec<&'static str>, Vec<&'static str>) {
        let k = self.planted.risky_states;
        let a = (0..k).map(|i| STATES[i * 5]).collect();
        let b = (0..k).map(|i| STATES[i * 5 + 2]).collect();
        (a, b)
    }

    pub fn theme_tokens(&self) -> (&'static [&'static str], &'static [&'static str]) {
        let g = self.planted.theme_group_size;
        (&THEME_A[..g], &THEME_B[..g])
    }
}

/// Deterministic 30-year quarterly macro path used when no series is supplied.
pub fn synthetic_macro_path(seed: u64) -> Vec<MacroSnapshot> {
    let mut r = rng::stream(seed, "generator/macro");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let phase: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let (mut tb_ar, mut gdp_ar, mut cpi_ar) = (0.0_f64, 0.0_f64, 0.0_f64);
    (0..120)
        .map(|t| {
            tb_ar = 0.8 * tb_ar + 0.004 * normal.sample(&mut r);
            gdp_ar = 0.7 * gdp_ar + 0.010 * normal.sample(&mut r);
            cpi_ar = 0.85 * cpi_ar + 0.004 * normal.sample(&mut r);
            let cycle = (std::f64::consts::TAU * t as f64 / 48.0 + phase).sin();
            MacroSnapshot {
                tbill_3m: (0.025 + 0.022 * cycle + tb_ar).max(0.0005),
                gdp_growth_prior_year: 0.022 + 0.01 * cycle + gdp_ar,
                core_cpi: (0.022 + 0.006 * cycle + cpi_ar).max(-0.01),
            }
        })
        .collect()
}

/// Vocabulary used to fill descriptions.
struct Vocabulary {
    head: Vec<String>,
    head_dist: WeightedIndex<f64>,
    tail: Vec<String>,
    tail_dist: WeightedIndex<f64>,
}

impl Vocabulary {
    fn new(n_head: usize, n_tail: usize) -> Self {
        let head: Vec<String> = (0..n_head)
            .map(|i| match HEAD_TOKENS.get(i) {
                Some(t) => (*t).to_string(),
                None => format!("common{i}"),
            })
            .collect();
        let tail: Vec<String> = (0..n_tail)
            .map(|i| match TAIL_WORDS.get(i) {
                Some(t) => (*t).to_string(),
                None => format!("term{i:05}"),
            })
            .collect();
        let head_w: Vec<f64> = (1..=n_head).map(|r| 1.0 / r as f64).collect();
        let tail_w: Vec<f64> = (1..=n_tail).map(|r| (r as f64).powf(-1.05)).collect();
        Vocabulary {
            head,
            head_dist: WeightedIndex::new(head_w).expect("positive weights"),
            tail,
            tail_dist: WeightedIndex::new(tail_w).expect("positive weights"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Theme {
    None,
    A,
    B,
}

struct Draft {
    record: BondRecord,
    latent: f64,
    base_spread: f64,
}

pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Vec<BondRecord>> {
    config.validate()?;
    let path = synthetic_macro_path(config.seed);
    generate_with_path(config, &path)
}

/// Generate using the observations of a loaded macro series as the issue
/// calendar.
pub fn generate_with_macro(config: &GeneratorConfig, series: &MacroSeries) -> Result<Vec<BondRecord>> {
    config.validate()?;
    if series.is_empty() {
        return Err(Error::invalid("macro series is empty"));
    }
    let path: Vec<MacroSnapshot> = series.iter().map(|(_, m)| *m).collect();
    generate_with_path(config, &path)
}

fn generate_with_path(config: &GeneratorConfig, path: &[MacroSnapshot]) -> Result<Vec<BondRecord>> {
    let p = &config.planted;
    let mut r = rng::stream(config.seed, "generator/attributes");
    let vocab = Vocabulary::new(config.vocab_head, config.vocab_tail);
    let (theme_a, theme_b) = config.theme_tokens();
    let (states_a, states_b) = config.risky_state_groups();

    let use_dist = WeightedIndex::new(USES.iter().map(|u| u.1)).expect("weights");
    let source_dist = WeightedIndex::new(SOURCE_WEIGHTS).expect("weights");
    let seniority_dist = WeightedIndex::new(SENIORITY_WEIGHTS).expect("weights");
    let call_dist = WeightedIndex::new(CALLS.iter().map(|c| c.1)).expect("weights");
    let tax_dist = WeightedIndex::new(TAX.iter().map(|t| t.1)).expect("weights");
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let duration_dist = LogNormal::new(8f64.ln(), 0.7).expect("lognormal");
    let len_sigma2 = (1.0 + (config.desc_len_std / config.desc_len_mean).powi(2)).ln();
    let len_dist = LogNormal::new(config.desc_len_mean.ln() - len_sigma2 / 2.0, len_sigma2.sqrt())
        .map_err(|e| Error::config(format!("description length: {e}")))?;
    let (m0, s0, shape, scale) = config.spread_mixture()?;
    let gamma = Gamma::new(shape, scale).map_err(|e| Error::config(format!("spread: {e}")))?;
    let near_zero = Normal::new(m0, s0).expect("normal");

    let width = config.n_records.to_string().len().max(7);
    let mut drafts = Vec::with_capacity(config.n_records);
    for i in 0..config.n_records {
        let state = STATES[r.random_range(0..STATES.len())];
        let use_idx = use_dist.sample(&mut r);
        let source = if r.random_bool(p.undisclosed_rate) {
            UNDISCLOSED
        } else {
            SOURCES[source_dist.sample(&mut r)]
        };
        let seniority = if r.random_bool(p.undisclosed_rate * 0.5) {
            UNDISCLOSED
        } else {
            SENIORITY[seniority_dist.sample(&mut r)]
        };
        let call = CALLS[call_dist.sample(&mut r)].0;
        let tax = TAX[tax_dist.sample(&mut r)].0;
        let macro_ = path[r.random_range(0..path.len())];
        let duration = duration_dist.sample(&mut r).clamp(0.5, 40.0);

        let base_spread = if r.random_bool(config.near_zero_spread_fraction) {
            near_zero.sample(&mut r)
        } else {
            gamma.sample(&mut r)
        };
        let coupon = (macro_.tbill_3m
            + 0.6 * base_spread.max(0.0)
            + 0.002 * duration.ln()
            + 0.003 * normal.sample(&mut r))
        .max(0.0);
        // Round to an eighth of a basis point grid like quoted coupons.
        let coupon = (coupon * 80_000.0).round() / 80_000.0;

        let u = r.random::<f64>();
        let theme = if u < p.theme_rate {
            Theme::A
        } else if u < 2.0 * p.theme_rate {
            Theme::B
        } else {
            Theme::None
        };
        let description = compose_description(
            &mut r,
            config,
            &vocab,
            &USES[use_idx].2,
            match theme {
                Theme::A => theme_a,
                Theme::B => theme_b,
                Theme::None => &[],
            },
            &len_dist,
        );

        let token_state = match theme {
            Theme::A => states_a.contains(&state),
            Theme::B => states_b.contains(&state),
            Theme::None => false,
        };
        let terms = (duration.ln() - p.duration_pivot.ln()) * (macro_.tbill_3m - p.tbill_pivot) > 0.0;
        let disclosure = source == UNDISCLOSED;
        let planted = p.token_state_weight * f64::from(u8::from(token_state))
            + p.terms_weight * f64::from(u8::from(terms))
            + p.disclosure_weight * f64::from(u8::from(disclosure));

        drafts.push(Draft {
            record: BondRecord {
                id: format!("B{i:0width$}"),
                state: state.to_string(),
                use_of_proceeds: USES[use_idx].0.to_string(),
                source_of_repayment: source.to_string(),
                seniority: seniority.to_string(),
                call_provision: call.to_string(),
                tax_status: tax.to_string(),
                coupon,
                duration_years: duration,
                spread: 0.0,
                rating: Rating::A,
                description,
                macro_,
                defaulted: false,
            },
            latent: planted,
            base_spread,
        });
    }

    add_linear_term(&mut drafts, p.linear_weight);

    let latent: Vec<f64> = drafts.iter().map(|d| d.latent * config.signal_strength).collect();
    let intercept = solve_intercept(&latent, config.default_rate);
    let probs: Vec<f64> = latent.iter().map(|z| sigmoid(intercept + z)).collect();
    let labels = systematic_sample(&probs, &mut rng::stream(config.seed, "generator/labels"));

    let mut r = rng::stream(config.seed, "generator/market");
    let rating_dist = Normal::<f64>::new(6.0, 3.0).expect("normal");
    Ok(drafts
        .into_iter()
        .zip(labels)
        .map(|(mut d, defaulted)| {
            d.record.defaulted = defaulted;
            d.record.spread = d.base_spread + if defaulted { config.default_spread_shift } else { 0.0 };
            let grade_p = if defaulted {
                config.rating_default_grade_defaulted
            } else {
                config.rating_default_grade_performing
            };
            d.record.rating = if r.random_bool(grade_p) {
                if r.random_bool(0.5) {
                    Rating::C
                } else {
                    Rating::D
                }
            } else {
                let rank = rating_dist.sample(&mut r).round().clamp(0.0, 17.0) as usize;
                Rating::from_rank(rank).expect("rank within scale")
            };
            d.record
        })
        .collect())
}

fn compose_description(
    r: &mut rng::Rng,
    config: &GeneratorConfig,
    vocab: &Vocabulary,
    topic: &[&str; 3],
    theme: &[&str],
    len_dist: &LogNormal<f64>,
) -> String {
    let mut words: Vec<&str> = Vec::new();
    if !theme.is_empty() {
        for _ in 0..config.planted.theme_mentions {
            words.push(theme[r.random_range(0..theme.len())]);
        }
    }
    words.push(topic[r.random_range(0..topic.len())]);
    let target = (len_dist.sample(r).round() as usize).max(1);
    while words.len() < target {
        let w = if r.random_bool(0.5) {
            &vocab.head[vocab.head_dist.sample(r)]
        } else {
            &vocab.tail[vocab.tail_dist.sample(r)]
        };
        words.push(w);
    }
    words.shuffle(r);
    words.join(" ")
}

fn add_linear_term(drafts: &mut [Draft], weight: f64) {
    if drafts.is_empty() || weight == 0.0 {
        return;
    }
    let zscores = |f: &dyn Fn(&BondRecord) -> f64| -> Vec<f64> {
        let v: Vec<f64> = drafts.iter().map(|d| f(&d.record)).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        v.into_iter()
            .map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 })
            .collect()
    };
    let coupon = zscores(&|b| b.coupon);
    let gdp = zscores(&|b| b.macro_.gdp_growth_prior_year);
    for (i, d) in drafts.iter_mut().enumerate() {
        let undisclosed_seniority = f64::from(u8::from(d.record.seniority == UNDISCLOSED));
        d.latent += weight * (0.5 * coupon[i] - 0.5 * gdp[i] + undisclosed_seniority);
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Intercept `b` with `mean(sigmoid(b + z_i)) == rate`.
fn solve_intercept(latent: &[f64], rate: f64) -> f64 {
    let n = latent.len() as f64;
    let mean_p = |b: f64| latent.iter().map(|z| sigmoid(b + z)).sum::<f64>() / n;
    let max_z = latent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_z = latent.iter().copied().fold(f64::INFINITY, f64::min);
    let logit = (rate / (1.0 - rate)).ln();
    let (mut lo, mut hi) = (logit - max_z - 1.0, logit - min_z + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_p(mid) < rate {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Systematic sampling over a random order: every unit is selected with
/// exactly its own probability while the total count equals `sum(p)` to
/// within one.
fn systematic_sample(probs: &[f64], r: &mut rng::Rng) -> Vec<bool> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.shuffle(r);
    let start: f64 = r.random();
    let mut labels = vec![false; probs.len()];
    let mut cum = start;
    for &i in &order {
        let next = cum + probs[i];
        if next.floor() > cum.floor() {
            labels[i] = true;
        }
        cum = next;
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n_records: 20_000,
            default_rate: 0.01,
            seed,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn rejects_too_few_expected_positives() {
        let cfg = GeneratorConfig {
            n_records: 5_000,
            default_rate: 0.001,
            ..GeneratorConfig::default()
        };
        let err = generate_synthetic(&cfg).unwrap_err();
        assert!(err.to_string().contains("too few expected positives"), "{err}");
    }

    #[test]
    fn rejects_invalid_config() {
        for cfg in [
            GeneratorConfig { default_rate: 0.0, ..small(1) },
            GeneratorConfig { default_rate: 1.0, ..small(1) },
            GeneratorConfig { spread_std: 0.0, ..small(1) },
            GeneratorConfig { signal_strength: -1.0, ..small(1) },
        ] {
            assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        let recs = generate_synthetic(&small(3)).unwrap();
        assert_eq!(recs.len(), 20_000);
        for r in &recs {
            r.validate().unwrap();
        }
        let mut ids: Vec<&str> = recs.iter().map(|r| r.id.as_str()).collect();
        ids.dedup();
        assert_eq!(ids.len(), recs.len());
    }

    #[test]
    fn same_seed_same_records() {
        assert_eq!(generate_synthetic(&small(9)).unwrap(), generate_synthetic(&small(9)).unwrap());
        assert_ne!(generate_synthetic(&small(9)).unwrap(), generate_synthetic(&small(10)).unwrap());
    }

    #[test]
    fn intercept_hits_target_rate() {
        let z: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let b = solve_intercept(&z, 0.02);
        let mean = z.iter().map(|v| sigmoid(b + v)).sum::<f64>() / 1000.0;
        assert!((mean - 0.02).abs() < 1e-9);
    }

    #[test]
    fn systematic_sampling_count_is_exact_to_one() {
        let probs: Vec<f64> = (0..10_000).map(|i| ((i % 13) as f64) / 1300.0).collect();
        let total: f64 = probs.iter().sum();
        let labels = systematic_sample(&probs, &mut rng::stream(1, "t"));
        let count = labels.iter().filter(|&&l| l).count() as f64;
        assert!((count - total).abs() <= 1.0);
    }
}
