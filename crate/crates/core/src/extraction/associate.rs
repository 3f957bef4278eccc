use std::collections::BTreeMap;

use super::{
    AssignMethod, Diagnostic, DiagnosticEvent, ExtractionError, ALIGNMENT_EPSILON,
    COLOR_MATCH_THRESHOLD,
};
use crate::chart::{Mark, MarkKind, Point, Rect, Rgb, TextElement};

/// Index of the nearest label by horizontal centre distance, for each mark
/// x position. Ties go to the label with the smaller x.
pub fn associate_categories(
    mark_x: &[f64],
    labels: &[TextElement],
) -> Result<Vec<usize>, ExtractionError> {
    if labels.is_empty() {
        return Err(ExtractionError::NoLabels);
    }
    Ok(mark_x
        .iter()
        .map(|&x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, l) in labels.iter().enumerate() {
                let c = l.bbox.center().x;
                let d = (c - x).abs();
                let better = d < best_d
                    || (d == best_d && c < labels[best].bbox.center().x);
                if better {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

/// A legend label with the swatch drawn next to it, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendEntry {
    pub label: String,
    pub bbox: Rect,
    pub preview: Option<(usize, Rgb)>,
}

/// Pairs swatches with legend labels and orders entries for reading: top to
/// bottom by row band, then left to right.
pub fn build_legend(previews: &[(usize, &Mark)], labels: &[TextElement]) -> Vec<LegendEntry> {
    let mut entries: Vec<LegendEntry> = labels
        .iter()
        .map(|l| LegendEntry {
            label: l.text.clone(),
            bbox: l.bbox,
            preview: None,
        })
        .collect();
    // greedy by distance from swatch right edge to label left edge
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, (_, m)) in previews.iter().enumerate() {
        let Some(r) = m.geometry.as_rect() else { continue };
        let anchor = Point::new(r.right(), r.center().y);
        for (li, e) in entries.iter().enumerate() {
            let target = Point::new(e.bbox.x, e.bbox.center().y);
            pairs.push((anchor.distance(&target), pi, li));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_preview = vec![false; previews.len()];
    for (_, pi, li) in pairs {
        if used_preview[pi] || entries[li].preview.is_some() {
            continue;
        }
        used_preview[pi] = true;
        entries[li].preview = Some((previews[pi].0, previews[pi].1.color));
    }
    let band = entries
        .iter()
        .map(|e| e.bbox.h)
        .fold(0.0_f64, f64::max)
        .max(1.0)
        / 2.0;
    entries.sort_by(|a, b| {
        let (ay, by) = (a.bbox.center().y, b.bbox.center().y);
        if (ay - by).abs() > band {
            ay.total_cmp(&by)
        } else {
            a.bbox.x.total_cmp(&b.bbox.x)
        }
    });
    entries
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesMatch {
    /// Index into the ordered legend entries.
    pub series: usize,
    pub method: AssignMethod,
}

enum ColorVerdict {
    Match(usize),
    Tie(Vec<usize>),
    Miss,
}

fn color_verdict(color: &Rgb, legend: &[LegendEntry]) -> ColorVerdict {
    let dists: Vec<(usize, f64)> = legend
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.preview.map(|(_, c)| (i, c.distance(color))))
        .collect();
    let Some(min) = dists.iter().map(|d| d.1).min_by(f64::total_cmp) else {
        return ColorVerdict::Miss;
    };
    if min > COLOR_MATCH_THRESHOLD {
        return ColorVerdict::Miss;
    }
    let tied: Vec<usize> = dists
        .iter()
        .filter(|d| (d.1 - min).abs() < 1e-9)
        .map(|d| d.0)
        .collect();
    if tied.len() == 1 {
        ColorVerdict::Match(tied[0])
    } else {
        ColorVerdict::Tie(tied)
    }
}

/// Matches data-encoding marks to legend entries.
///
/// `marks` are the data marks with their spec indices; `categories` gives the
/// category index of each (used to propagate an alignment match to marks at
/// the same within-category rank). Rules, in order: nearest swatch colour
/// within [`COLOR_MATCH_THRESHOLD`]; legend label horizontally centred over a
/// mark within [`ALIGNMENT_EPSILON`]; for line vertices, nearest line to the
/// label. Marks still unmatched come back as `None`.
pub fn associate_series(
    marks: &[(usize, &Mark)],
    categories: &[usize],
    legend_previews: &[(usize, &Mark)],
    legend_labels: &[TextElement],
) -> (Vec<LegendEntry>, Vec<Option<SeriesMatch>>, Vec<Diagnostic>) {
    let legend = build_legend(legend_previews, legend_labels);
    let mut diags = Vec::new();
    if legend.is_empty() {
        let all = marks
            .iter()
            .map(|_| {
                Some(SeriesMatch {
                    series: 0,
                    method: AssignMethod::Implicit,
                })
            })
            .collect();
        return (legend, all, diags);
    }

    let aligned = alignment_series(marks, categories, &legend);
    let mut out: Vec<Option<SeriesMatch>> = vec![None; marks.len()];
    let mut ties: Vec<Option<Vec<usize>>> = vec![None; marks.len()];

    for (k, (idx, m)) in marks.iter().enumerate() {
        match color_verdict(&m.color, &legend) {
            ColorVerdict::Match(s) => {
                out[k] = Some(SeriesMatch {
                    series: s,
                    method: AssignMethod::ColorMatch,
                });
                if let Some(a) = aligned[k] {
                    if a != s {
                        diags.push(Diagnostic::new(
                            DiagnosticEvent::ColorAlignmentConflict,
                            format!(
                                "mark {idx}: colour says {:?}, alignment says {:?}; keeping colour",
                                legend[s].label, legend[a].label
                            ),
                        ));
                    }
                }
            }
            ColorVerdict::Tie(t) => ties[k] = Some(t),
            ColorVerdict::Miss => {}
        }
    }

    for (k, (idx, _)) in marks.iter().enumerate() {
        if out[k].is_some() {
            continue;
        }
        if let Some(a) = aligned[k] {
            out[k] = Some(SeriesMatch {
                series: a,
                method: AssignMethod::Alignment,
            });
            diags.push(Diagnostic::new(
                DiagnosticEvent::FallbackAlignment,
                format!("mark {idx} matched to {:?} by alignment", legend[a].label),
            ));
        }
    }

    proximity_fallback(marks, &legend, &mut out, &mut diags);

    for (k, (idx, _)) in marks.iter().enumerate() {
        if out[k].is_some() {
            continue;
        }
        if let Some(tied) = &ties[k] {
            let leftmost = *tied
                .iter()
                .min_by(|a, b| legend[**a].bbox.x.total_cmp(&legend[**b].bbox.x))
                .expect("ties are non-empty");
            out[k] = Some(SeriesMatch {
                series: leftmost,
                method: AssignMethod::ColorMatch,
            });
            diags.push(Diagnostic::new(
                DiagnosticEvent::AmbiguousSeries,
                format!(
                    "mark {idx} ties between {} legend entries; chose leftmost {:?}",
                    tied.len(),
                    legend[leftmost].label
                ),
            ));
        }
    }
    (legend, out, diags)
}

/// Series implied by vertical alignment of legend labels with marks, spread
/// to every mark with the same rank inside its category group.
fn alignment_series(
    marks: &[(usize, &Mark)],
    categories: &[usize],
    legend: &[LegendEntry],
) -> Vec<Option<usize>> {
    let centers: Vec<Point> = marks.iter().map(|(_, m)| m.geometry.center()).collect();
    let mut direct: Vec<Option<usize>> = vec![None; marks.len()];
    for (k, c) in centers.iter().enumerate() {
        let hits: Vec<usize> = legend
            .iter()
            .enumerate()
            .filter(|(_, e)| (e.bbox.center().x - c.x).abs() <= ALIGNMENT_EPSILON)
            .map(|(i, _)| i)
            .collect();
        if hits.len() == 1 {
            direct[k] = Some(hits[0]);
        }
    }

    // rank of each mark within its category, by x
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, cat) in categories.iter().enumerate() {
        groups.entry(*cat).or_default().push(k);
    }
    let mut rank = vec![0usize; marks.len()];
    for members in groups.values_mut() {
        members.sort_by(|a, b| centers[*a].x.total_cmp(&centers[*b].x));
        for (r, k) in members.iter().enumerate() {
            rank[*k] = r;
        }
    }
    let mut by_rank: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, d) in direct.iter().enumerate() {
        if let Some(s) = d {
            by_rank.entry(rank[k]).or_insert(*s);
        }
    }
    (0..marks.len())
        .map(|k| direct[k].or_else(|| by_rank.get(&rank[k]).copied()))
        .collect()
}

/// Lines without swatches: group unmatched vertices by colour and give each
/// group the legend label closest to any of its vertices.
fn proximity_fallback(
    marks: &[(usize, &Mark)],
    legend: &[LegendEntry],
    out: &mut [Option<SeriesMatch>],
    diags: &mut Vec<Diagnostic>,
) {
    let pending: Vec<usize> = (0..marks.len())
        .filter(|&k| out[k].is_none() && marks[k].1.kind == MarkKind::LinePoint)
        .collect();
    if pending.is_empty() {
        return;
    }
    let mut groups: Vec<(Rgb, Vec<usize>)> = Vec::new();
    for &k in &pending {
        let c = marks[k].1.color;
        match groups
            .iter_mut()
            .find(|(gc, _)| gc.distance(&c) <= COLOR_MATCH_THRESHOLD)
        {
            Some((_, members)) => members.push(k),
            None => groups.push((c, vec![k])),
        }
    }
    let claimed: Vec<bool> = (0..legend.len())
        .map(|s| out.iter().flatten().any(|m| m.series == s))
        .collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (g, (_, members)) in groups.iter().enumerate() {
        for (s, e) in legend.iter().enumerate() {
            if claimed[s] {
                continue;
            }
            let c = e.bbox.center();
            let d = members
                .iter()
                .map(|&k| marks[k].1.geometry.center().distance(&c))
                .fold(f64::INFINITY, f64::min);
            pairs.push((d, g, s));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut group_done = vec![false; groups.len()];
    let mut label_done = vec![false; legend.len()];
    for (_, g, s) in pairs {
        if group_done[g] || label_done[s] {
            continue;
        }
        group_done[g] = true;
        label_done[s] = true;
        for &k in &groups[g].1 {
            out[k] = Some(SeriesMatch {
                series: s,
                method: AssignMethod::Proximity,
            });
        }
        diags.push(Diagnostic::new(
            DiagnosticEvent::FallbackProximity,
            format!(
                "{} line vertices matched to {:?} by proximity",
                groups[g].1.len(),
                legend[s].label
            ),
        ));
    }
}
