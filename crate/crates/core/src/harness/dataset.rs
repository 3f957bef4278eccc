use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layout::{lay_out, LegendStyle, PALETTE};
use super::noise::apply_noise;
use super::questions::{generate_question, unanswerable_question, Ctx};
use super::words::THEMES;
use super::{DatasetConfig, HarnessError, MarkTruth, NoiseModel, QAExample, QuestionKind, SplitTag, Streams};
use crate::extraction::DEFAULT_VALUE_HEADER;
use crate::chart::{parse_chart_spec, rasterize, ChartSpec, ChartType, DataTable};
use crate::metrics::RELAXED_TOLERANCE;

/// Value per pixel is `UNIT_TENTHS[k] / 10`.
const UNIT_TENTHS: [u32; 7] = [1, 2, 5, 10, 20, 50, 100];
const MULTI_SERIES_PROBABILITY: f64 = 0.3;
const MAX_PIE_ROWS: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedChart {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub split: SplitTag,
    /// The chart description as seen by extraction, noise included.
    pub spec: ChartSpec,
    pub table: DataTable,
    pub truth: Vec<MarkTruth>,
    pub style: LegendStyle,
    pub qa: Vec<QAExample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub noise: NoiseModel,
    pub raster_size: Option<usize>,
    pub charts: Vec<GeneratedChart>,
}

impl Dataset {
    pub fn examples(&self) -> impl Iterator<Item = (&GeneratedChart, &QAExample)> {
        self.charts.iter().flat_map(|c| c.qa.iter().map(move |q| (c, q)))
    }

    pub fn chart(&self, id: &str) -> Option<&GeneratedChart> {
        self.charts.iter().find(|c| c.chart_id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub chart_id: String,
    pub chart_type: ChartType,
    pub split: SplitTag,
    /// Relative to the manifest's directory.
    pub chart_spec: PathBuf,
    pub table_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster: Option<PathBuf>,
    pub legend_style: LegendStyle,
    pub mark_truth: Vec<MarkTruth>,
    pub qa: Vec<QAExample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raster_size: Option<usize>,
    pub entries: Vec<ManifestEntry>,
}

fn pick_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Pie shares in tenths of a percent, each at least 5 %, summing to 100 %.
fn pie_shares(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let spare = 1000 - 50 * n as u32;
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut tenths: Vec<u32> = w.iter().map(|x| 50 + (x / total * spare as f64).floor() as u32).collect();
    let short = 1000 - tenths.iter().sum::<u32>();
    for k in 0..short as usize {
        tenths[k % n] += 1;
    }
    tenths.into_iter().map(|t| f64::from(t) / 10.0).collect()
}

fn split_for(config: &DatasetConfig, rng: &mut ChaCha8Rng) -> SplitTag {
    let x: f64 = rng.random();
    if x < config.train_fraction {
        SplitTag::Train
    } else if x < config.train_fraction + config.validation_fraction {
        SplitTag::Validation
    } else {
        SplitTag::Test
    }
}

fn generate_chart(
    config: &DatasetConfig,
    noise: &NoiseModel,
    streams: &Streams,
    index: usize,
    chart_type: ChartType,
) -> Result<GeneratedChart, HarnessError> {
    let mut rng = streams.stream("chart", index as u64);
    let theme = THEMES.choose(&mut rng).expect("themes are non-empty");
    let max_rows = match chart_type {
        ChartType::Pie => config.max_rows.min(MAX_PIE_ROWS).max(config.min_rows),
        _ => config.max_rows,
    }
    .min(theme.categories.len());
    let n = rng.random_range(config.min_rows.min(max_rows)..=max_rows);
    let mut categories: Vec<String> = theme.categories.iter().map(|s| s.to_string()).collect();
    categories.shuffle(&mut rng);
    categories.truncate(n);

    let m = if chart_type != ChartType::Pie && config.max_series > 1 && rng.random_bool(MULTI_SERIES_PROBABILITY) {
        rng.random_range(2..=config.max_series.min(theme.series.len()))
    } else {
        1
    };
    let headers: Vec<String> = if chart_type == ChartType::Pie {
        vec![DEFAULT_VALUE_HEADER.to_string()]
    } else if m == 1 {
        vec![theme.value_title.to_string()]
    } else {
        let mut s: Vec<String> = theme.series.iter().map(|s| s.to_string()).collect();
        s.shuffle(&mut rng);
        s.truncate(m);
        s
    };

    let tenths = *UNIT_TENTHS.choose(&mut rng).expect("non-empty");
    let unit = f64::from(tenths) / 10.0;
    let cells: Vec<Vec<Option<f64>>> = match chart_type {
        ChartType::Pie => pie_shares(n, &mut rng).into_iter().map(|v| vec![Some(v)]).collect(),
        _ => (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        let px: u32 = rng.random_range(120..=470);
                        Some(f64::from(px * tenths) / 10.0)
                    })
                    .collect()
            })
            .collect(),
    };
    let table = DataTable::new(headers, categories, cells)
        .map_err(|e| HarnessError::Config(format!("generated table: {e}")))?;

    let mut colors: Vec<usize> = (0..PALETTE.len()).collect();
    colors.shuffle(&mut rng);
    let style = if chart_type == ChartType::Pie || m == 1 {
        LegendStyle::None
    } else if rng.random_bool(config.swatchless_fraction) {
        match chart_type {
            ChartType::Bar => LegendStyle::AlignedLabels,
            _ => LegendStyle::LineEndLabels,
        }
    } else {
        LegendStyle::Swatches
    };
    let layout = lay_out(&table, chart_type, style, &colors, theme.title, unit)?;
    let spec = apply_noise(&layout.spec, noise, &mut streams.stream("noise", index as u64));
    let split = split_for(config, &mut streams.stream("split", index as u64));
    let chart_id = format!("{}_{index:05}", chart_type.as_str());

    let ctx = Ctx {
        chart_type,
        table: &table,
        colors: &colors,
    };
    let mut qrng = streams.stream("qa", index as u64);
    let weights = config.kind_mix.weights();
    let mut qa: Vec<QAExample> = Vec::with_capacity(config.questions_per_chart);
    let mut attempts = 0;
    while qa.len() < config.questions_per_chart && attempts < config.questions_per_chart * 20 {
        attempts += 1;
        let example = if qrng.random_bool(config.unanswerable_fraction) {
            let (question, answer) = unanswerable_question(&ctx, RELAXED_TOLERANCE + 0.01, &mut qrng);
            QAExample {
                chart_id: chart_id.clone(),
                question,
                gold_answer: answer,
                kind: QuestionKind::DataRetrieval,
                supervision: None,
                unanswerable: true,
            }
        } else {
            let kind = QuestionKind::ALL[pick_weighted(&weights, &mut qrng)];
            let g = generate_question(&ctx, kind, &mut qrng);
            QAExample {
                chart_id: chart_id.clone(),
                question: g.question,
                gold_answer: g.answer,
                kind,
                supervision: Some(g.target),
                unanswerable: false,
            }
        };
        if qa.iter().all(|q| q.question != example.question) {
            qa.push(example);
        }
    }

    Ok(GeneratedChart {
        chart_id,
        chart_type,
        split,
        spec,
        table,
        truth: layout.truth,
        style,
        qa,
    })
}

/// Generates `config.bars` bar charts, then lines, then pies. Every chart
/// draws from its own seeded streams, so the output depends only on
/// `(config, noise, seed)` and not on thread scheduling.
pub fn generate_dataset(config: &DatasetConfig, noise: &NoiseModel, seed: u64) -> Result<Dataset, HarnessError> {
    config.validate()?;
    noise.validate()?;
    let streams = Streams::new(seed);
    let plan: Vec<ChartType> = std::iter::repeat_n(ChartType::Bar, config.bars)
        .chain(std::iter::repeat_n(ChartType::Line, config.lines))
        .chain(std::iter::repeat_n(ChartType::Pie, config.pies))
        .collect();
    let charts = plan
        .par_iter()
        .enumerate()
        .map(|(i, t)| generate_chart(config, noise, &streams, i, *t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        seed,
        noise: *noise,
        raster_size: config.raster_size,
        charts,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

/// Writes `manifest.json` plus `charts/`, `tables/` and (with a raster size)
/// `rasters/` under `dir`. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf, HarnessError> {
    let mut subdirs = vec!["charts", "tables"];
    if dataset.raster_size.is_some() {
        subdirs.push("rasters");
    }
    for sub in subdirs {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| HarnessError::io(&p, e))?;
    }
    let entries = dataset
        .charts
        .par_iter()
        .map(|c| {
            let spec_rel = PathBuf::from("charts").join(format!("{}.json", c.chart_id));
            let table_rel = PathBuf::from("tables").join(format!("{}.csv", c.chart_id));
            let spec_json = serde_json::to_vec_pretty(&c.spec).expect("chart specs serialize");
            write_file(&dir.join(&spec_rel), &spec_json)?;
            write_file(&dir.join(&table_rel), c.table.to_csv().as_bytes())?;
            let raster = match dataset.raster_size {
                Some(size) => {
                    let rel = PathBuf::from("rasters").join(format!("{}.ppm", c.chart_id));
                    write_file(&dir.join(&rel), &rasterize(&c.spec, size).to_ppm())?;
                    Some(rel)
                }
                None => None,
            };
            Ok(ManifestEntry {
                chart_id: c.chart_id.clone(),
                chart_type: c.chart_type,
                split: c.split,
                chart_spec: spec_rel,
                table_csv: table_rel,
                raster,
                legend_style: c.style,
                mark_truth: c.truth.clone(),
                qa: c.qa.clone(),
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let manifest = DatasetManifest {
        seed: dataset.seed,
        noise: dataset.noise,
        raster_size: dataset.raster_size,
        entries,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_vec_pretty(&manifest).expect("manifests serialize");
    write_file(&path, &json)?;
    Ok(path)
}

fn read_text(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Reads a manifest and every chart and table it references.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, HarnessError> {
    let raw = read_text(manifest_path)?;
    let de = &mut serde_json::Deserializer::from_str(&raw);
    let manifest: DatasetManifest = serde_path_to_error::deserialize(de)
        .map_err(|e| HarnessError::Manifest(format!("{}: at {}: {}", manifest_path.display(), e.path(), e.inner())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let charts = manifest
        .entries
        .into_iter()
        .map(|e| {
            let spec_path = base.join(&e.chart_spec);
            let spec = parse_chart_spec(&read_text(&spec_path)?).map_err(|source| HarnessError::Spec {
                path: spec_path.display().to_string(),
                source,
            })?;
            let table_path = base.join(&e.table_csv);
            let table = DataTable::from_csv(&read_text(&table_path)?).map_err(|source| HarnessError::Table {
                path: table_path.display().to_string(),
                source,
            })?;
            if spec.chart_type != e.chart_type {
                return Err(HarnessError::Manifest(format!(
                    "{}: manifest says {}, spec says {}",
                    e.chart_id, e.chart_type, spec.chart_type
                )));
            }
            if let Some(q) = e.qa.iter().find(|q| q.chart_id != e.chart_id) {
                return Err(HarnessError::Manifest(format!(
                    "{}: question {:?} belongs to {}",
                    e.chart_id, q.question, q.chart_id
                )));
            }
            Ok(GeneratedChart {
                chart_id: e.chart_id,
                chart_type: e.chart_type,
                split: e.split,
                spec,
                table,
                truth: e.mark_truth,
                style: e.legend_style,
                qa: e.qa,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset {
        seed: manifest.seed,
        noise: manifest.noise,
        raster_size: manifest.raster_size,
        charts,
    })
}
