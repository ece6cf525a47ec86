use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{compare_ids, sort_records, Metric, MetricRecord, ProtocolError, RunManifest, Subset};
use crate::stats::{
    core_thin_gap, effect_size, mean, robustness_profile, sample_std, wilcoxon_signed_rank,
    PairedSample,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingCell {
    pub method: String,
    pub image_id: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerMethodRow {
    pub method: String,
    pub n_images: usize,
    /// 0 for deterministic methods.
    pub n_seeds: usize,
    pub f1: MetricSummary,
    pub iou: MetricSummary,
    pub bf1: MetricSummary,
    pub b_iou: MetricSummary,
}

impl PerMethodRow {
    pub fn summary(&self, m: Metric) -> MetricSummary {
        match m {
            Metric::F1 => self.f1,
            Metric::Iou => self.iou,
            Metric::Bf1 => self.bf1,
            Metric::BIou => self.b_iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreThinRow {
    pub method: String,
    pub metric: Metric,
    pub n_core: usize,
    pub n_thin: usize,
    pub core_mean: Option<f64>,
    pub thin_mean: Option<f64>,
    /// core minus thin.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub method: String,
    pub reference: String,
    pub metric: Metric,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    pub wins: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRow {
    pub a: String,
    pub b: String,
    pub metric: Metric,
    pub n: usize,
    pub n_effective: usize,
    pub w: f64,
    pub p: f64,
    pub exact: bool,
    pub alpha_corr: f64,
    pub significant: bool,
    pub mean_delta: f64,
    pub std_delta: f64,
    pub median_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTables {
    pub per_method: Vec<PerMethodRow>,
    pub core_thin: Vec<CoreThinRow>,
    pub robustness: Vec<RobustnessRow>,
    pub pairwise: Vec<PairwiseRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub records: Vec<MetricRecord>,
    pub tables: ReportTables,
}

impl Report {
    pub fn build(manifest: RunManifest, mut records: Vec<MetricRecord>) -> Result<Self, ProtocolError> {
        let tables = aggregate(&manifest, &records)?;
        sort_records(&mut records);
        Ok(Self {
            manifest,
            records,
            tables,
        })
    }

    pub fn to_json(&self) -> String {
        super::json::to_fixed_json(self)
    }

    /// Plain-text tables, scores at 3 decimals.
    pub fn to_text(&self) -> String {
        render_text(&self.tables)
    }
}

/// Per-image scores of one method, averaged over seeds, in image order.
struct MethodScores {
    n_seeds: usize,
    per_image: Vec<[f64; 4]>,
}

fn check_grid(
    manifest: &RunManifest,
    records: &[MetricRecord],
    images: &[String],
) -> Result<HashMap<String, MethodScores>, ProtocolError> {
    let unknown: BTreeSet<String> = records
        .iter()
        .filter(|r| !manifest.methods.contains(&r.method))
        .map(|r| r.method.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(ProtocolError::UnknownMethods(unknown.into_iter().collect()));
    }

    let mut cells: HashMap<(&str, &str, Option<u64>), &MetricRecord> = HashMap::new();
    for r in records {
        if cells
            .insert((&r.method, &r.image_id, r.seed), r)
            .is_some()
        {
            return Err(ProtocolError::DuplicateRecord {
                method: r.method.clone(),
                image_id: r.image_id.clone(),
                seed: r.seed,
            });
        }
    }

    let mut missing = Vec::new();
    let mut out = HashMap::new();
    for method in &manifest.methods {
        let seeded = records.iter().any(|r| &r.method == method && r.seed.is_some());
        let seeds: Vec<Option<u64>> = if seeded {
            manifest.seeds.iter().map(|&s| Some(s)).collect()
        } else {
            vec![None]
        };
        let mut per_image = Vec::with_capacity(images.len());
        for id in images {
            let mut acc = [0.0; 4];
            let mut found = 0usize;
            for &seed in &seeds {
                match cells.get(&(method.as_str(), id.as_str(), seed)) {
                    Some(r) => {
                        for (a, m) in acc.iter_mut().zip(Metric::ALL) {
                            *a += m.of(r);
                        }
                        found += 1;
                    }
                    None => missing.push(MissingCell {
                        method: method.clone(),
                        image_id: id.clone(),
                        seed,
                    }),
                }
            }
            // seeded methods must not also carry seedless records
            if seeded && cells.contains_key(&(method.as_str(), id.as_str(), None)) {
                return Err(ProtocolError::DuplicateRecord {
                    method: method.clone(),
                    image_id: id.clone(),
                    seed: None,
                });
            }
            if found > 0 {
                per_image.push(acc.map(|v| v / found as f64));
            }
        }
        out.insert(
            method.clone(),
            MethodScores {
                n_seeds: if seeded { seeds.len() } else { 0 },
                per_image,
            },
        );
    }
    // seeds outside the manifest are not part of the grid
    if let Some(r) = records
        .iter()
        .find(|r| r.seed.is_some_and(|s| !manifest.seeds.contains(&s)))
    {
        missing.push(MissingCell {
            method: r.method.clone(),
            image_id: r.image_id.clone(),
            seed: r.seed,
        });
    }
    if !missing.is_empty() {
        return Err(ProtocolError::IncompleteGrid(missing));
    }
    Ok(out)
}

fn resolve_reference(manifest: &RunManifest) -> Result<String, ProtocolError> {
    match &manifest.reference_method {
        Some(r) if manifest.methods.contains(r) => Ok(r.clone()),
        Some(r) => Err(ProtocolError::UnknownReference(r.clone())),
        None => Ok(manifest
            .methods
            .iter()
            .find(|m| m.as_str() == "sauvola")
            .unwrap_or(&manifest.methods[0])
            .clone()),
    }
}

/// Builds all report tables. Every method must have a record for every
/// image seen in `records` (and, for seeded methods, every manifest seed).
pub fn aggregate(manifest: &RunManifest, records: &[MetricRecord]) -> Result<ReportTables, ProtocolError> {
    manifest.validate()?;
    if records.is_empty() {
        return Err(ProtocolError::EmptyManifest("records"));
    }
    let mut images: Vec<String> = records
        .iter()
        .map(|r| r.image_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    images.sort_by(|a, b| compare_ids(a, b));
    let scores = check_grid(manifest, records, &images)?;
    let metric = manifest.stats_metric;
    let column = |method: &str, m: Metric| -> Vec<f64> {
        let idx = Metric::ALL.iter().position(|x| *x == m).unwrap();
        scores[method].per_image.iter().map(|s| s[idx]).collect()
    };

    let per_method = manifest
        .methods
        .iter()
        .map(|method| {
            let summary = |m: Metric| {
                let v = column(method, m);
                MetricSummary {
                    mean: mean(&v),
                    std: sample_std(&v),
                }
            };
            PerMethodRow {
                method: method.clone(),
                n_images: images.len(),
                n_seeds: scores[method].n_seeds,
                f1: summary(Metric::F1),
                iou: summary(Metric::Iou),
                bf1: summary(Metric::Bf1),
                b_iou: summary(Metric::BIou),
            }
        })
        .collect();

    let core_thin = manifest
        .methods
        .iter()
        .map(|method| {
            let v = column(method, metric);
            let pick = |subset: Subset| -> Vec<f64> {
                images
                    .iter()
                    .zip(&v)
                    .filter(|(id, _)| manifest.split.subset_of(id) == Some(subset))
                    .map(|(_, s)| *s)
                    .collect()
            };
            let core = pick(Subset::Core);
            let thin = pick(Subset::Thin);
            let avg = |s: &[f64]| (!s.is_empty()).then(|| mean(s));
            CoreThinRow {
                method: method.clone(),
                metric,
                n_core: core.len(),
                n_thin: thin.len(),
                core_mean: avg(&core),
                thin_mean: avg(&thin),
                gap: core_thin_gap(&core, &thin).ok(),
            }
        })
        .collect();

    let reference = resolve_reference(manifest)?;
    let ref_scores = column(&reference, metric);
    let robustness = manifest
        .methods
        .iter()
        .map(|method| {
            let p = robustness_profile(&column(method, metric), &ref_scores)?;
            Ok(RobustnessRow {
                method: method.clone(),
                reference: reference.clone(),
                metric,
                mean: p.mean,
                median: p.median,
                q1: p.q1,
                q3: p.q3,
                iqr: p.iqr,
                min: p.min,
                max: p.max,
                wins: p.wins,
                n: p.n,
            })
        })
        .collect::<Result<Vec<_>, ProtocolError>>()?;

    let k = manifest.methods.len();
    let comparisons = (k * (k - 1) / 2).max(1);
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (&manifest.methods[i], &manifest.methods[j]);
            let sample = PairedSample::new(images.clone(), column(a, metric), column(b, metric))?;
            let w = wilcoxon_signed_rank(&sample, comparisons)?;
            let e = effect_size(&sample)?;
            pairwise.push(PairwiseRow {
                a: a.clone(),
                b: b.clone(),
                metric,
                n: sample.len(),
                n_effective: w.n_effective,
                w: w.w_statistic,
                p: w.p_value,
                exact: w.exact,
                alpha_corr: w.alpha_corr,
                significant: w.significant,
                mean_delta: e.mean_delta,
                std_delta: e.std_delta,
                median_delta: e.median_delta,
            });
        }
    }

    Ok(ReportTables {
        per_method,
        core_thin,
        robustness,
        pairwise,
    })
}

fn table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>()));
    let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
}

fn f3(v: f64) -> String {
    format!("{v:.3}")
}

fn opt3(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), f3)
}

fn pm(s: MetricSummary) -> String {
    format!("{:.3} ± {:.3}", s.mean, s.std)
}

pub fn render_text(t: &ReportTables) -> String {
    let mut out = String::new();
    let rows: Vec<Vec<String>> = t
        .per_method
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.n_images.to_string(),
                r.n_seeds.to_string(),
                pm(r.f1),
                pm(r.iou),
                pm(r.bf1),
                pm(r.b_iou),
            ]
        })
        .collect();
    table(&mut out, "Per-method scores (mean ± std over images)", &["method", "images", "seeds", "F1", "IoU", "BF1", "B-IoU"], &rows);

    let metric = t.core_thin.first().map_or("f1", |r| r.metric.name());
    let rows: Vec<Vec<String>> = t
        .core_thin
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                opt3(r.core_mean),
                opt3(r.thin_mean),
                opt3(r.gap),
            ]
        })
        .collect();
    table(&mut out, &format!("Core vs thin ({metric})"), &["method", "core", "thin", "gap"], &rows);

    let reference = t.robustness.first().map_or("", |r| r.reference.as_str());
    let rows: Vec<Vec<String>> = t
        .robustness
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                f3(r.mean),
                f3(r.median),
                f3(r.iqr),
                f3(r.min),
                f3(r.max),
                format!("{}/{}", r.wins, r.n),
            ]
        })
        .collect();
    table(&mut out, &format!("Robustness ({metric}, wins vs {reference})"), &["method", "mean", "median", "IQR", "min", "max", "wins"], &rows);

    let rows: Vec<Vec<String>> = t
        .pairwise
        .iter()
        .map(|r| {
            vec![
                format!("{} vs {}", r.a, r.b),
                format!("{}", r.w),
                format!("{:.3e}", r.p),
                format!("{:.4}", r.alpha_corr),
                if r.significant { "yes" } else { "no" }.into(),
                f3(r.mean_delta),
                f3(r.std_delta),
                f3(r.median_delta),
            ]
        })
        .collect();
    table(&mut out, &format!("Pairwise Wilcoxon signed-rank ({metric})"), &["pair", "W", "p", "alpha", "sig", "mean Δ", "std Δ", "median Δ"], &rows);
    out
}
