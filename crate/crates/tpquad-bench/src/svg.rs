//! Minimal static SVG boxplots of per-trajectory scores.

/// Five-number summary plus outliers, whiskers at 1.5 IQR.
struct BoxStats {
    q1: f64,
    median: f64,
    q3: f64,
    whisker_lo: f64,
    whisker_hi: f64,
    outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

fn box_stats(values: &[f64]) -> BoxStats {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    let q1 = quantile(&sorted, 0.25);
    let median = quantile(&sorted, 0.5);
    let q3 = quantile(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .copied()
        .find(|v| *v >= lo_fence)
        .unwrap_or(q1);
    let whisker_hi = sorted
        .iter()
        .rev()
        .copied()
        .find(|v| *v <= hi_fence)
        .unwrap_or(q3);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|v| *v < lo_fence || *v > hi_fence)
        .collect();
    BoxStats {
        q1,
        median,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    }
}

/// Renders one boxplot per labelled series. With `show_outliers` the y-range
/// covers everything and outliers are drawn as circles; without it the
/// range is clipped to the whiskers.
pub fn boxplot_svg(series: &[(String, Vec<f64>)], title: &str, show_outliers: bool) -> String {
    let width = 160.0 + 110.0 * series.len() as f64;
    let height = 420.0;
    let (top, bottom, left) = (52.0, 56.0, 64.0);
    let plot_h = height - top - bottom;

    let stats: Vec<BoxStats> = series.iter().map(|(_, v)| box_stats(v)).collect();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (s, (_, values)) in stats.iter().zip(series.iter()) {
        if show_outliers {
            for v in values {
                y_min = y_min.min(*v);
                y_max = y_max.max(*v);
            }
        } else {
            y_min = y_min.min(s.whisker_lo);
            y_max = y_max.max(s.whisker_hi);
        }
    }
    if y_min == y_max {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let y = |v: f64| top + plot_h * (1.0 - (v - y_min) / (y_max - y_min));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">{title}</text>\n",
        width / 2.0
    ));

    // y axis with a handful of ticks
    svg.push_str(&format!(
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    for t in 0..=4 {
        let v = y_min + (y_max - y_min) * t as f64 / 4.0;
        let yy = y(v);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{yy}\" x2=\"{left}\" y2=\"{yy}\" stroke=\"black\"/>\n",
            left - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{v:.3}</text>\n",
            left - 8.0,
            yy + 4.0
        ));
    }

    for (i, ((label, _), s)) in series.iter().zip(stats.iter()).enumerate() {
        let cx = left + 60.0 + 110.0 * i as f64;
        let half = 32.0;
        // whiskers
        svg.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>\n",
            y(s.whisker_lo),
            y(s.q1)
        ));
        svg.push_str(&format!(
            "<line x1=\"{cx}\" y1=\"{}\" x2=\"{cx}\" y2=\"{}\" stroke=\"black\"/>\n",
            y(s.q3),
            y(s.whisker_hi)
        ));
        for v in [s.whisker_lo, s.whisker_hi] {
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
                cx - half / 2.0,
                y(v),
                cx + half / 2.0,
                y(v)
            ));
        }
        // box and median
        svg.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"black\"/>\n",
            cx - half,
            y(s.q3),
            2.0 * half,
            (y(s.q1) - y(s.q3)).max(1.0)
        ));
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>\n",
            cx - half,
            y(s.median),
            cx + half,
            y(s.median)
        ));
        if show_outliers {
            for v in &s.outliers {
                svg.push_str(&format!(
                    "<circle cx=\"{cx}\" cy=\"{}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n",
                    y(*v)
                ));
            }
        }
        svg.push_str(&format!(
            "<text x=\"{cx}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>\n",
            height - 24.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_valid_looking_svg() {
        let series = vec![
            ("A".to_string(), vec![1.0, 2.0, 3.0, 4.0, 100.0]),
            ("B".to_string(), vec![2.0, 2.5, 3.0, 3.5, 4.0]),
        ];
        let with = boxplot_svg(&series, "scores", true);
        let without = boxplot_svg(&series, "scores", false);
        for svg in [&with, &without] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.ends_with("</svg>\n"));
            assert!(svg.contains(">A<") && svg.contains(">B<"));
        }
        // The outlier at 100 shows up only in the outlier view.
        assert!(with.contains("circle"));
        assert!(!without.contains("circle"));
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
