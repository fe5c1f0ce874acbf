//! Per-arc feature extraction, per-instance min-max normalization, and the
//! dataset file format.

use std::fmt::Write as _;

use thiserror::Error;

use crate::net::{Network, R_LOAD, R_TIME};

/// Number of entries in a feature vector; see [`FEATURE_NAMES`] for the
/// layout. Readers reject files whose header names do not match.
pub const FEATURE_COUNT: usize = 21;

/// Version of the feature layout, stored in trained models so that a model
/// is never applied to vectors with a different meaning.
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Column names, in vector order:
/// cost and the two consumptions of the arc itself, endpoint degrees,
/// min/max/avg consumption per resource over the tail's outgoing and the
/// head's incoming arcs, then the time windows of both endpoints.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "cost",
    "time_consumption",
    "load_consumption",
    "tail_out_degree",
    "head_in_degree",
    "tail_out_time_min",
    "tail_out_time_max",
    "tail_out_time_avg",
    "tail_out_load_min",
    "tail_out_load_max",
    "tail_out_load_avg",
    "head_in_time_min",
    "head_in_time_max",
    "head_in_time_avg",
    "head_in_load_min",
    "head_in_load_max",
    "head_in_load_avg",
    "head_window_lo",
    "head_window_hi",
    "tail_window_lo",
    "tail_window_hi",
];

pub type FeatureVector = [f64; FEATURE_COUNT];

/// One dataset row: an arc's features with its collected label.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcSample {
    pub instance_id: String,
    pub arc_id: usize,
    pub features: FeatureVector,
    pub label: bool,
}

/// Per-feature (min, max) pairs used by min-max normalization.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    /// Fits the per-feature ranges of a sample set.
    pub fn fit(samples: &[ArcSample]) -> NormStats {
        let mut min = vec![f64::INFINITY; FEATURE_COUNT];
        let mut max = vec![f64::NEG_INFINITY; FEATURE_COUNT];
        for s in samples {
            for (i, v) in s.features.iter().enumerate() {
                min[i] = min[i].min(*v);
                max[i] = max[i].max(*v);
            }
        }
        NormStats { min, max }
    }

    /// Maps a raw vector into [0, 1] per feature; features with a collapsed
    /// range map to 0.
    pub fn apply(&self, raw: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            let span = self.max[i] - self.min[i];
            out[i] = if span > 0.0 { (raw[i] - self.min[i]) / span } else { 0.0 };
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("arc {0} is depot-incident; only customer-to-customer arcs are sampled")]
    DepotArc(usize),
    #[error("no samples to normalize")]
    Empty,
    #[error("dataset line {line}: {msg}")]
    BadDataset { line: usize, msg: String },
    #[error("label mask length {got} does not match arc count {want}")]
    MaskLength { got: usize, want: usize },
}

/// Computes the feature vector of one selectable arc against the full
/// network's adjacency.
pub fn extract_features(net: &Network, arc_id: usize) -> Result<FeatureVector, FeatureError> {
    if !net.is_selectable(arc_id) {
        return Err(FeatureError::DepotArc(arc_id));
    }
    let arc = &net.arcs[arc_id];
    let tail = &net.nodes[arc.tail];
    let head = &net.nodes[arc.head];
    let mut f = [0.0; FEATURE_COUNT];
    f[0] = arc.cost;
    f[1] = arc.consumption[R_TIME];
    f[2] = arc.consumption[R_LOAD];
    f[3] = net.out_arcs[arc.tail].len() as f64;
    f[4] = net.in_arcs[arc.head].len() as f64;
    let (tmin, tmax, tavg) = aggregate(net, &net.out_arcs[arc.tail], R_TIME);
    let (lmin, lmax, lavg) = aggregate(net, &net.out_arcs[arc.tail], R_LOAD);
    f[5] = tmin;
    f[6] = tmax;
    f[7] = tavg;
    f[8] = lmin;
    f[9] = lmax;
    f[10] = lavg;
    let (tmin, tmax, tavg) = aggregate(net, &net.in_arcs[arc.head], R_TIME);
    let (lmin, lmax, lavg) = aggregate(net, &net.in_arcs[arc.head], R_LOAD);
    f[11] = tmin;
    f[12] = tmax;
    f[13] = tavg;
    f[14] = lmin;
    f[15] = lmax;
    f[16] = lavg;
    f[17] = head.window_lo[R_TIME];
    f[18] = head.window_hi[R_TIME];
    f[19] = tail.window_lo[R_TIME];
    f[20] = tail.window_hi[R_TIME];
    Ok(f)
}

fn aggregate(net: &Network, arc_ids: &[usize], resource: usize) -> (f64, f64, f64) {
    debug_assert!(!arc_ids.is_empty(), "adjacency of a sampled arc's endpoint");
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &a in arc_ids {
        let v = net.arcs[a].consumption[resource];
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    (min, max, sum / arc_ids.len() as f64)
}

/// Extracts and labels every selectable arc of a full network, then applies
/// per-instance min-max normalization. `labels[arc_id]` indexes the full arc
/// list. Returns the normalized samples and the fitted ranges.
pub fn build_samples(
    net: &Network,
    instance_id: &str,
    labels: &[bool],
) -> Result<(Vec<ArcSample>, NormStats), FeatureError> {
    if labels.len() != net.arcs.len() {
        return Err(FeatureError::MaskLength {
            got: labels.len(),
            want: net.arcs.len(),
        });
    }
    let mut raw = Vec::new();
    for arc_id in net.selectable_arc_ids() {
        raw.push(ArcSample {
            instance_id: instance_id.to_string(),
            arc_id,
            features: extract_features(net, arc_id)?,
            label: labels[arc_id],
        });
    }
    normalize_instance(raw)
}

/// Min-max normalizes a single instance's samples; the fitted (min, max)
/// pairs are returned for reuse on that instance at prediction time.
pub fn normalize_instance(
    samples: Vec<ArcSample>,
) -> Result<(Vec<ArcSample>, NormStats), FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::Empty);
    }
    let stats = NormStats::fit(&samples);
    let normalized = samples
        .into_iter()
        .map(|mut s| {
            s.features = stats.apply(&s.features);
            s
        })
        .collect();
    Ok((normalized, stats))
}

/// Serializes samples as delimited text: one header row with the id columns
/// and the feature names, then one row per sample. Feature values carry 17
/// significant digits so they round-trip exactly.
pub fn write_dataset(samples: &[ArcSample]) -> String {
    let mut out = String::new();
    out.push_str("instance_id,arc_id,");
    out.push_str(&FEATURE_NAMES.join(","));
    out.push_str(",label\n");
    for s in samples {
        write!(out, "{},{}", s.instance_id, s.arc_id).unwrap();
        for v in &s.features {
            write!(out, ",{}", fmt_sig17(*v)).unwrap();
        }
        writeln!(out, ",{}", u8::from(s.label)).unwrap();
    }
    out
}

/// Formats with 17 significant digits (1 leading + 16 fractional digits in
/// scientific notation), enough to reconstruct any f64 exactly.
pub fn fmt_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a dataset produced by [`write_dataset`], validating the header so
/// files with a different feature layout are rejected.
pub fn read_dataset(text: &str) -> Result<Vec<ArcSample>, FeatureError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(FeatureError::BadDataset {
        line: 1,
        msg: "empty file".into(),
    })?;
    let expected = format!("instance_id,arc_id,{},label", FEATURE_NAMES.join(","));
    if header != expected {
        return Err(FeatureError::BadDataset {
            line: 1,
            msg: "header does not match the supported feature layout".into(),
        });
    }
    let mut samples = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_COUNT + 3 {
            return Err(FeatureError::BadDataset {
                line: lineno,
                msg: format!("expected {} fields, found {}", FEATURE_COUNT + 3, fields.len()),
            });
        }
        let bad = |msg: String| FeatureError::BadDataset { line: lineno, msg };
        let arc_id = fields[1]
            .parse::<usize>()
            .map_err(|_| bad(format!("bad arc id {:?}", fields[1])))?;
        let mut features = [0.0; FEATURE_COUNT];
        for (i, tok) in fields[2..2 + FEATURE_COUNT].iter().enumerate() {
            features[i] = tok
                .parse::<f64>()
                .map_err(|_| bad(format!("bad feature value {tok:?}")))?;
        }
        let label = match fields[FEATURE_COUNT + 2] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("bad label {other:?}"))),
        };
        samples.push(ArcSample {
            instance_id: fields[0].to_string(),
            arc_id,
            features,
            label,
        });
    }
    Ok(samples)
}
