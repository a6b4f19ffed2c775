//! Result tables (CSV, Markdown) and grouped bar charts (SVG).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::Summary;
use crate::model::write_string;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub csv: String,
    pub markdown: String,
}

/// One row per dataset, one column per condition.
///
/// CSV cells hold the full-precision value; Markdown cells are rounded to
/// three decimals. Missing cells are empty in CSV and `-` in Markdown.
pub fn emit_table(summary: &Summary) -> Table {
    let mut header = vec!["dataset".to_string()];
    header.extend(summary.conditions.iter().cloned());

    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(&header).expect("in-memory write");
    for row in &summary.rows {
        let mut record = vec![row.dataset_id.clone()];
        record.extend(row.values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        writer.write_record(&record).expect("in-memory write");
    }
    let csv = String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 input");

    let mut markdown = String::new();
    let _ = writeln!(markdown, "| {} |", header.join(" | "));
    let _ = writeln!(markdown, "|{}", "---|".repeat(header.len()));
    for row in &summary.rows {
        let cells: Vec<String> = row
            .values
            .iter()
            .map(|v| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into()))
            .collect();
        let _ = writeln!(
            markdown,
            "| {} | {} |",
            row.dataset_id.replace('|', "\\|"),
            cells.join(" | ")
        );
    }
    Table { csv, markdown }
}

pub const PLOT_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 90.0;
const LEGEND_WIDTH: f64 = 140.0;
const BAR_WIDTH: f64 = 18.0;
const GROUP_GAP: f64 = 16.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Grouped bars of balanced accuracy: one group per dataset plus a final
/// `mean` group, one bar per condition, y axis fixed to [0, 1].
///
/// Bars carry `data-group`, `data-condition` and `data-value` attributes;
/// a bar's height is `value × PLOT_HEIGHT` pixels.
pub fn emit_bar_chart(summary: &Summary) -> String {
    let n_cond = summary.conditions.len().max(1);
    let mut groups: Vec<(String, Vec<Option<f64>>)> = summary
        .rows
        .iter()
        .map(|r| (r.dataset_id.clone(), r.values.clone()))
        .collect();
    if !groups.is_empty() {
        groups.push((
            "mean".into(),
            summary.means.iter().map(|m| Some(m.mean_balanced_accuracy)).collect(),
        ));
    }

    let group_width = n_cond as f64 * BAR_WIDTH + GROUP_GAP;
    let plot_width = (groups.len() as f64 * group_width).max(200.0);
    let width = MARGIN_LEFT + plot_width + LEGEND_WIDTH;
    let height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM;
    let baseline = MARGIN_TOP + PLOT_HEIGHT;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="13">Balanced accuracy</text>"#,
        MARGIN_LEFT + plot_width / 2.0
    );

    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = baseline - v * PLOT_HEIGHT;
        let _ = writeln!(
            svg,
            r##"<line class="grid" x1="{MARGIN_LEFT:.1}" y1="{y:.3}" x2="{:.1}" y2="{y:.3}" stroke="#dddddd"/>"##,
            MARGIN_LEFT + plot_width
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.3}" text-anchor="end">{v:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{MARGIN_LEFT:.1}" y1="{MARGIN_TOP:.1}" x2="{MARGIN_LEFT:.1}" y2="{baseline:.1}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line class="axis" x1="{MARGIN_LEFT:.1}" y1="{baseline:.1}" x2="{:.1}" y2="{baseline:.1}" stroke="black"/>"#,
        MARGIN_LEFT + plot_width
    );

    if groups.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="gray">no data</text>"#,
            MARGIN_LEFT + plot_width / 2.0,
            MARGIN_TOP + PLOT_HEIGHT / 2.0
        );
    }

    for (g, (name, values)) in groups.iter().enumerate() {
        let gx = MARGIN_LEFT + GROUP_GAP / 2.0 + g as f64 * group_width;
        for (c, value) in values.iter().enumerate() {
            let Some(value) = value else { continue };
            let v = value.clamp(0.0, 1.0);
            let h = v * PLOT_HEIGHT;
            let _ = writeln!(
                svg,
                r#"<rect class="bar" data-group="{}" data-condition="{}" data-value="{value}" x="{:.3}" y="{:.3}" width="{BAR_WIDTH:.3}" height="{h:.3}" fill="{}"/>"#,
                escape(name),
                escape(&summary.conditions[c]),
                gx + c as f64 * BAR_WIDTH,
                baseline - h,
                PALETTE[c % PALETTE.len()]
            );
        }
        let lx = gx + n_cond as f64 * BAR_WIDTH / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.3}" y="{:.3}" text-anchor="end" transform="rotate(-45 {lx:.3} {:.3})">{}</text>"#,
            baseline + 14.0,
            baseline + 14.0,
            escape(name)
        );
    }

    let legend_x = MARGIN_LEFT + plot_width + 16.0;
    for (c, cond) in summary.conditions.iter().enumerate() {
        let y = MARGIN_TOP + c as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"<rect class="legend" x="{legend_x:.1}" y="{y:.1}" width="12" height="12" fill="{}"/>"#,
            PALETTE[c % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            legend_x + 18.0,
            y + 10.0,
            escape(cond)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `table.csv`, `table.md` and `chart.svg` into `dir`.
pub fn write_report(summary: &Summary, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let table = emit_table(summary);
    write_string(&dir.join("table.csv"), &table.csv)?;
    write_string(&dir.join("table.md"), &table.markdown)?;
    write_string(&dir.join("chart.svg"), &emit_bar_chart(summary))
}
