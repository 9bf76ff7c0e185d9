//! Entropy of mixing, sampling-rate recommendation, and cyclic bucket
//! accumulation with controlled forgetting. The analyzers are pure
//! functions over immutable inputs; a bucket series has a single writer.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("no signal")]
    NoSignal,
    #[error("series too short: {0} samples")]
    TooShort(usize),
    #[error("bucket width {width} does not divide period {period}")]
    UnevenBuckets { period: u64, width: u64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e.to_string())
    }
}

/// A stream of payloads with optional category labels drawn from a known,
/// finite alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorizedStream {
    pub alphabet: Vec<String>,
    pub items: Vec<(String, Option<String>)>,
}

impl CategorizedStream {
    pub fn new(alphabet: Vec<String>) -> Self {
        CategorizedStream {
            alphabet,
            items: Vec::new(),
        }
    }

    pub fn push(&mut self, payload: impl Into<String>, label: Option<&str>) {
        self.items.push((payload.into(), label.map(String::from)));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport {
    /// Mean per-item entropy of the category-recovery posterior, in bits:
    /// 0 when every item keeps its label, log2 |alphabet| when labels were
    /// mixed away.
    pub entropy_bits: f64,
    pub max_bits: f64,
    /// Mean recovery posterior per category. Uniform after unlabelled
    /// aggregation; the empirical source distribution when labels survive.
    pub posterior: BTreeMap<String, f64>,
}

impl EntropyReport {
    /// Shannon entropy of the posterior map itself. For a labelled stream
    /// this is the source-distribution entropy.
    pub fn source_entropy_bits(&self) -> f64 {
        shannon_bits(self.posterior.values().copied())
    }
}

fn shannon_bits(probabilities: impl Iterator<Item = f64>) -> f64 {
    let s: f64 = probabilities
        .filter(|p| *p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    s.max(0.0)
}

/// How much category information survives aggregation. With labels, each
/// item's posterior is a point mass on its own category and nothing is
/// lost. Without labels the receiver's posterior is uniform over the whole
/// alphabet — mixed signals cannot be separated back into their categories,
/// no matter how much data arrives.
pub fn mixing_entropy(
    stream: &CategorizedStream,
    labelled: bool,
) -> Result<EntropyReport, MetricsError> {
    if stream.alphabet.is_empty() {
        return Err(MetricsError::EmptyAlphabet);
    }
    let k = stream.alphabet.len() as f64;
    let max_bits = k.log2();
    let mut posterior: BTreeMap<String, f64> =
        stream.alphabet.iter().map(|c| (c.clone(), 0.0)).collect();

    if !labelled {
        for p in posterior.values_mut() {
            *p = 1.0 / k;
        }
        let per_item = shannon_bits(posterior.values().copied());
        return Ok(EntropyReport {
            entropy_bits: per_item,
            max_bits,
            posterior,
        });
    }

    let mut total = 0u64;
    for (_, label) in &stream.items {
        let Some(label) = label else {
            return Err(MetricsError::UnknownCategory("<unlabelled item>".into()));
        };
        let slot = posterior
            .get_mut(label)
            .ok_or_else(|| MetricsError::UnknownCategory(label.clone()))?;
        *slot += 1.0;
        total += 1;
    }
    if total > 0 {
        for p in posterior.values_mut() {
            *p /= total as f64;
        }
    }
    Ok(EntropyReport {
        entropy_bits: 0.0, // every item's posterior is a point mass
        max_bits,
        posterior,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Significance {
    /// Maximum entropy: causally random, no event stands out.
    None,
    /// Minimum entropy: maximal significance.
    Maximal,
    Score(f64),
}

impl std::fmt::Display for Significance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Significance::None => write!(f, "none"),
            Significance::Maximal => write!(f, "maximal"),
            Significance::Score(s) => write!(f, "{s}"),
        }
    }
}

/// Significance is the heuristic inverse of entropy.
pub fn significance(report: &EntropyReport) -> Significance {
    const EPS: f64 = 1e-12;
    if (report.entropy_bits - report.max_bits).abs() <= EPS {
        Significance::None
    } else if report.entropy_bits <= EPS {
        Significance::Maximal
    } else {
        Significance::Score(1.0 - report.entropy_bits / report.max_bits)
    }
}

/// Equally spaced numeric samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub values: Vec<f64>,
    /// Ticks between samples.
    pub spacing: u32,
}

impl SampleSeries {
    pub fn new(values: Vec<f64>) -> Self {
        SampleSeries { values, spacing: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingAdvice {
    /// Smallest lag (in ticks) where normalized autocorrelation first drops
    /// below 1/e.
    pub autocorr_time: usize,
    /// Recommended sampling interval: about half the autocorrelation time.
    pub recommended_interval: usize,
}

/// Estimate the autocorrelation time of a series and recommend a sampling
/// interval of half that. Constant data carries no signal and is refused.
pub fn recommend_sampling(series: &SampleSeries) -> Result<SamplingAdvice, MetricsError> {
    let values = &series.values;
    if values.len() < 2 {
        return Err(MetricsError::TooShort(values.len()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(MetricsError::NoSignal);
    }
    let threshold = 1.0 / std::f64::consts::E;
    let max_lag = n / 2;
    let mut autocorr_time = max_lag;
    for lag in 1..=max_lag {
        let num: f64 = (0..n - lag)
            .map(|t| (values[t] - mean) * (values[t + lag] - mean))
            .sum();
        if num / denom < threshold {
            autocorr_time = lag;
            break;
        }
    }
    let ticks = autocorr_time * series.spacing as usize;
    Ok(SamplingAdvice {
        autocorr_time: ticks,
        recommended_interval: (ticks / 2).max(1),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    sum: f64,
    weight: f64,
    last_period: Option<u64>,
}

impl Bucket {
    pub fn mean(&self) -> f64 {
        if self.weight > 0.0 {
            self.sum / self.weight
        } else {
            0.0
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Fixed-size cyclic accumulator: timestamps wrap around the period like a
/// clockface, values merge into running weighted means, and each wrap
/// multiplies old weight by a decay factor — bounded memory with a constant
/// gradient of forgetting. Observations are labelled by their timestamp, so
/// duplicates are no-ops and arrival order never matters.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketSeries {
    period: u64,
    width: u64,
    decay: f64,
    buckets: Vec<Bucket>,
    seen: HashSet<(u64, u64)>,
}

impl BucketSeries {
    /// Default forgetting factor per wrap.
    pub const DEFAULT_DECAY: f64 = 0.6;

    pub fn new(period: u64, width: u64, decay: f64) -> Result<Self, MetricsError> {
        if width == 0 || period == 0 || !period.is_multiple_of(width) {
            return Err(MetricsError::UnevenBuckets { period, width });
        }
        Ok(BucketSeries {
            period,
            width,
            decay,
            buckets: vec![
                Bucket {
                    sum: 0.0,
                    weight: 0.0,
                    last_period: None,
                };
                (period / width) as usize
            ],
            seen: HashSet::new(),
        })
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket(&self, index: usize) -> Option<&Bucket> {
        self.buckets.get(index)
    }

    pub fn index_of(&self, timestamp: u64) -> usize {
        ((timestamp % self.period) / self.width) as usize
    }

    /// Merge one labelled observation. Idempotent per (timestamp, value);
    /// an observation from period p always ends up weighted by
    /// decay^(latest period - p), whatever order it arrives in.
    pub fn update(&mut self, timestamp: u64, value: f64) {
        if !self.seen.insert((timestamp, value.to_bits())) {
            return;
        }
        let index = self.index_of(timestamp);
        let period = timestamp / self.period;
        let decay = self.decay;
        let bucket = &mut self.buckets[index];
        match bucket.last_period {
            None => {
                bucket.sum = value;
                bucket.weight = 1.0;
                bucket.last_period = Some(period);
            }
            Some(last) if period > last => {
                let d = decay.powi((period - last) as i32);
                bucket.sum = bucket.sum * d + value;
                bucket.weight = bucket.weight * d + 1.0;
                bucket.last_period = Some(period);
            }
            Some(last) if period == last => {
                bucket.sum += value;
                bucket.weight += 1.0;
            }
            Some(last) => {
                // late arrival from an earlier period: merge pre-decayed
                let d = decay.powi((last - period) as i32);
                bucket.sum += value * d;
                bucket.weight += d;
            }
        }
    }

    /// State file: header (period, width, decay) and one record per
    /// non-empty bucket. Deterministic; equal states serialize identically.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "period\t{}", self.period);
        let _ = writeln!(out, "width\t{}", self.width);
        let _ = writeln!(out, "decay\t{}", self.decay);
        for (index, bucket) in self.buckets.iter().enumerate() {
            if let Some(last) = bucket.last_period {
                let _ = writeln!(
                    out,
                    "B\t{}\t{}\t{}\t{}",
                    index, bucket.sum, bucket.weight, last
                );
            }
        }
        out
    }

    pub fn parse(input: &str) -> Result<BucketSeries, MetricsError> {
        let mut period = None;
        let mut width = None;
        let mut decay = BucketSeries::DEFAULT_DECAY;
        let mut records: Vec<(usize, f64, f64, u64)> = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let err = |message: String| MetricsError::Parse {
                line: lineno,
                message,
            };
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "period" if fields.len() == 2 => {
                    period = Some(fields[1].parse().map_err(|_| err("bad period".into()))?)
                }
                "width" if fields.len() == 2 => {
                    width = Some(fields[1].parse().map_err(|_| err("bad width".into()))?)
                }
                "decay" if fields.len() == 2 => {
                    decay = fields[1].parse().map_err(|_| err("bad decay".into()))?
                }
                "B" if fields.len() == 5 => {
                    records.push((
                        fields[1].parse().map_err(|_| err("bad index".into()))?,
                        fields[2].parse().map_err(|_| err("bad sum".into()))?,
                        fields[3].parse().map_err(|_| err("bad weight".into()))?,
                        fields[4].parse().map_err(|_| err("bad period".into()))?,
                    ));
                }
                other => return Err(err(format!("unknown record tag {other:?}"))),
            }
        }
        let (Some(period), Some(width)) = (period, width) else {
            return Err(MetricsError::Parse {
                line: 0,
                message: "missing period/width header".into(),
            });
        };
        let mut series = BucketSeries::new(period, width, decay)?;
        for (index, sum, weight, last) in records {
            if let Some(bucket) = series.buckets.get_mut(index) {
                *bucket = Bucket {
                    sum,
                    weight,
                    last_period: Some(last),
                };
            }
        }
        Ok(series)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        fs::write(path, self.to_lines())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<BucketSeries, MetricsError> {
        let text = fs::read_to_string(path)?;
        BucketSeries::parse(&text)
    }
}

/// Parse a numeric series from CSV text: one sample per line, the last
/// comma-separated field is the value. Blank lines and `#` comments skip.
pub fn parse_series(input: &str) -> Result<Vec<f64>, MetricsError> {
    let mut values = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        let value: f64 = field.parse().map_err(|_| MetricsError::Parse {
            line: idx + 1,
            message: format!("bad sample {field:?}"),
        })?;
        values.push(value);
    }
    Ok(values)
}

/// Parse (timestamp, value) observation pairs from CSV text.
pub fn parse_observations(input: &str) -> Result<Vec<(u64, f64)>, MetricsError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MetricsError::Parse {
            line: idx + 1,
            message,
        };
        let (ts, value) = line
            .split_once(',')
            .ok_or_else(|| err("expected timestamp,value".into()))?;
        out.push((
            ts.trim()
                .parse()
                .map_err(|_| err(format!("bad timestamp {ts:?}")))?,
            value
                .trim()
                .parse()
                .map_err(|_| err(format!("bad value {value:?}")))?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alphabet(k: usize) -> Vec<String> {
        (1..=k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn single_category_has_zero_entropy() {
        let stream = CategorizedStream::new(alphabet(1));
        let report = mixing_entropy(&stream, false).unwrap();
        assert_eq!(report.entropy_bits, 0.0);
        assert_eq!(report.max_bits, 0.0);
    }

    #[test]
    fn unlabelled_mixing_reaches_maximum_entropy() {
        let mut stream = CategorizedStream::new(alphabet(4));
        for i in 0..20 {
            stream.push(format!("x{i}"), None);
        }
        let report = mixing_entropy(&stream, false).unwrap();
        assert_eq!(report.entropy_bits, 2.0);
        for p in report.posterior.values() {
            assert_eq!(*p, 0.25);
        }
    }

    #[test]
    fn labelled_counts_keep_the_source_distribution() {
        let mut stream = CategorizedStream::new(alphabet(3));
        for (label, count) in [("c1", 2), ("c2", 1), ("c3", 1)] {
            for _ in 0..count {
                stream.push("payload", Some(label));
            }
        }
        let report = mixing_entropy(&stream, true).unwrap();
        assert_eq!(report.entropy_bits, 0.0);
        assert_eq!(report.source_entropy_bits(), 1.5);
    }

    #[test]
    fn empty_alphabet_and_unknown_labels_error() {
        let stream = CategorizedStream::new(vec![]);
        assert_eq!(
            mixing_entropy(&stream, false),
            Err(MetricsError::EmptyAlphabet)
        );
        let mut stream = CategorizedStream::new(alphabet(2));
        stream.push("x", Some("zebra"));
        assert!(matches!(
            mixing_entropy(&stream, true),
            Err(MetricsError::UnknownCategory(_))
        ));
    }

    #[test]
    fn significance_inverts_entropy() {
        let mut stream = CategorizedStream::new(alphabet(4));
        stream.push("x", None);
        let unlabelled = mixing_entropy(&stream, false).unwrap();
        assert_eq!(significance(&unlabelled), Significance::None);

        let mut stream = CategorizedStream::new(alphabet(4));
        stream.push("x", Some("c1"));
        let labelled = mixing_entropy(&stream, true).unwrap();
        assert_eq!(significance(&labelled), Significance::Maximal);

        let partial = EntropyReport {
            entropy_bits: 1.0,
            max_bits: 2.0,
            posterior: BTreeMap::new(),
        };
        assert_eq!(significance(&partial), Significance::Score(0.5));
    }

    #[test]
    fn sine_autocorrelation_time_matches_the_analytic_crossing() {
        let series = SampleSeries::new(
            (0..1024)
                .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 64.0).sin())
                .collect(),
        );
        let advice = recommend_sampling(&series).unwrap();
        // analytic crossing: 64 * arccos(1/e) / 2pi = 12.4
        assert!(advice.autocorr_time.abs_diff(12) <= 2, "{advice:?}");
        assert_eq!(advice.recommended_interval, advice.autocorr_time / 2);
    }

    #[test]
    fn white_noise_decorrelates_at_the_first_lag() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let series = SampleSeries::new((0..512).map(|_| rng.random_range(-1.0..1.0)).collect());
        let advice = recommend_sampling(&series).unwrap();
        assert_eq!(advice.autocorr_time, 1);
        assert_eq!(advice.recommended_interval, 1);
    }

    #[test]
    fn constant_series_has_no_signal() {
        let series = SampleSeries::new(vec![5.0; 64]);
        assert_eq!(recommend_sampling(&series), Err(MetricsError::NoSignal));
    }

    #[test]
    fn bucket_layout_and_wraparound() {
        let week = 7 * 24 * 3600;
        let series = BucketSeries::new(week, 300, 0.6).unwrap();
        assert_eq!(series.bucket_count(), 2016);

        let mut series = BucketSeries::new(100, 10, 0.5).unwrap();
        assert_eq!(series.index_of(42), series.index_of(142));
        series.update(42, 1.0);
        series.update(142, 3.0);
        let bucket = series.bucket(4).unwrap();
        // first value decayed once: (1*0.5 + 3) / (0.5 + 1)
        assert_eq!(bucket.mean(), 3.5 / 1.5);

        assert!(BucketSeries::new(100, 7, 0.5).is_err());
    }

    #[test]
    fn duplicate_observations_are_no_ops() {
        let mut series = BucketSeries::new(100, 10, 0.5).unwrap();
        series.update(42, 1.0);
        let snapshot = series.to_lines();
        series.update(42, 1.0);
        assert_eq!(series.to_lines(), snapshot);
    }

    #[test]
    fn bucket_state_is_order_independent() {
        let observations = [
            (5u64, 1.0f64),
            (105, 2.0),
            (205, 4.0),
            (15, 8.0),
            (215, 16.0),
        ];
        let mut forward = BucketSeries::new(100, 10, 0.5).unwrap();
        for (t, v) in observations {
            forward.update(t, v);
        }
        let mut shuffled = BucketSeries::new(100, 10, 0.5).unwrap();
        for (t, v) in [
            (215u64, 16.0f64),
            (5, 1.0),
            (205, 4.0),
            (105, 2.0),
            (15, 8.0),
        ] {
            shuffled.update(t, v);
        }
        assert_eq!(forward.to_lines(), shuffled.to_lines());
    }

    #[test]
    fn state_file_round_trips() {
        let mut series = BucketSeries::new(100, 10, 0.5).unwrap();
        series.update(42, 1.37);
        series.update(142, 2.91);
        let parsed = BucketSeries::parse(&series.to_lines()).unwrap();
        assert_eq!(parsed.to_lines(), series.to_lines());
    }

    #[test]
    fn series_csv_parses_last_field() {
        let values = parse_series("# header\n1.0\n2,4.5\n\n3,9.25\n").unwrap();
        assert_eq!(values, vec![1.0, 4.5, 9.25]);
        assert!(parse_series("1.0\nnope\n").is_err());
    }
}
