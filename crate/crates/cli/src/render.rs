//! Timeline rendering: one horizontal band per label run, one row per track.

use std::fmt::Write;

use colontcn::data::LabelClass;

/// Fill color of each class, indexed like [`LabelClass::ALL`].
pub const PALETTE: [&str; 10] = [
    "#7f7f7f", // outside
    "#1f77b4", // insertion
    "#d62728", // cecum
    "#9467bd", // ileum
    "#2ca02c", // ascending
    "#ff7f0e", // transverse
    "#17becf", // descending
    "#bcbd22", // sigmoid
    "#e377c2", // rectum
    "#ffffff", // uncertain
];

const LEFT: f64 = 140.0;
const WIDTH: f64 = 1000.0;
const ROW: f64 = 28.0;
const GAP: f64 = 10.0;

/// Maximal runs `(start, end_exclusive, label)`.
pub fn bands(labels: &[LabelClass]) -> Vec<(usize, usize, LabelClass)> {
    let mut out: Vec<(usize, usize, LabelClass)> = Vec::new();
    for (t, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.2 == l => last.1 = t + 1,
            _ => out.push((t, t + 1, l)),
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// SVG document with one row per `(name, labels)` track and a legend.
///
/// Every track must have the same length.
pub fn render_svg(tracks: &[(String, Vec<LabelClass>)]) -> Result<String, String> {
    let frames = tracks.first().map_or(0, |t| t.1.len());
    if let Some((name, l)) = tracks.iter().find(|t| t.1.len() != frames) {
        return Err(format!("track {name} has {} frames, expected {frames}", l.len()));
    }
    let scale = if frames == 0 { 0.0 } else { WIDTH / frames as f64 };
    let legend_y = GAP + tracks.len() as f64 * (ROW + GAP);
    let height = legend_y + 2.0 * ROW;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" viewBox="0 0 {} {height}" font-family="sans-serif" font-size="12">"#,
        LEFT + WIDTH + GAP,
        LEFT + WIDTH + GAP
    );
    for (row, (name, labels)) in tracks.iter().enumerate() {
        let y = GAP + row as f64 * (ROW + GAP);
        let _ = writeln!(svg, r#"<g class="track" data-name="{}">"#, escape(name));
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + ROW * 0.65,
            escape(name)
        );
        for (start, end, label) in bands(labels) {
            let _ = writeln!(
                svg,
                r#"<rect x="{:.3}" y="{y}" width="{:.3}" height="{ROW}" fill="{}" data-start="{start}" data-end="{end}"><title>{} [{start}, {end})</title></rect>"#,
                LEFT + start as f64 * scale,
                (end - start) as f64 * scale,
                PALETTE[label.index()],
                label.name()
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    let step = WIDTH / LabelClass::TARGETS.len() as f64;
    for (i, l) in LabelClass::TARGETS.iter().enumerate() {
        let x = LEFT + i as f64 * step;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.3}" y="{legend_y}" width="12" height="12" fill="{}"/><text x="{:.3}" y="{}">{}</text>"#,
            PALETTE[l.index()],
            x + 16.0,
            legend_y + 10.0,
            l.name()
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(idx: &[usize]) -> Vec<LabelClass> {
        idx.iter().map(|&i| LabelClass::from_index(i).unwrap()).collect()
    }

    #[test]
    fn band_boundaries_are_label_changes() {
        let l = labels(&[0, 0, 1, 1, 1, 2, 0, 0]);
        let b = bands(&l);
        let starts: Vec<usize> = b.iter().map(|x| x.0).collect();
        let changes: Vec<usize> = std::iter::once(0).chain((1..l.len()).filter(|&t| l[t] != l[t - 1])).collect();
        assert_eq!(starts, changes);
        assert_eq!(b.last().unwrap().1, l.len());
    }

    #[test]
    fn single_class_spans_full_width() {
        let svg = render_svg(&[("gt".into(), labels(&[4; 50]))]).unwrap();
        assert_eq!(svg.matches("data-start").count(), 1);
        assert!(svg.contains(r#"x="140.000""#) && svg.contains(r#"width="1000.000""#));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(render_svg(&[("a".into(), labels(&[0, 1])), ("b".into(), labels(&[0]))]).is_err());
    }
}
