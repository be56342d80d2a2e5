use std::fmt::Write;

use super::{KpiRow, Polarity, ProductSection, ReportDocument, APPENDIX_KINDS, HEADLINE_KINDS};
use crate::survey::KpiKind;

const INSUFFICIENT: &str = "insufficient data";
const NA: &str = "n/a";
const RISE: &str = "▲";
const FALL: &str = "▼";

fn kind_label(kind: KpiKind) -> &'static str {
    match kind {
        KpiKind::Psat => "PSAT",
        KpiKind::UxLite => "UX-Lite",
        KpiKind::UeqOverall => "UEQ-S overall",
        KpiKind::UeqPragmatic => "UEQ-S pragmatic",
        KpiKind::UeqHedonic => "UEQ-S hedonic",
        KpiKind::Nps => "NPS",
    }
}

/// Display cells of one row: n, value, interval, grade, change, marker.
struct Cells {
    n: String,
    value: String,
    ci: String,
    grade: String,
    change: String,
    marker: Option<&'static str>,
}

fn cells(row: &KpiRow) -> Cells {
    let n = row.current.as_ref().map_or(0, |p| p.n).to_string();
    let result = row.current.as_ref().and_then(|p| p.result.as_ref());
    let (value, ci, grade) = match result {
        Some(r) => (
            format!("{:.2}", r.value),
            format!("{:.2} to {:.2}", r.ci_low, r.ci_high),
            match (&r.benchmark_category, &r.percentile_band) {
                (Some(c), Some(b)) => format!("{c} ({b})"),
                (Some(c), None) => c.clone(),
                _ => NA.to_owned(),
            },
        ),
        None => (INSUFFICIENT.to_owned(), NA.to_owned(), NA.to_owned()),
    };
    let change = row.delta.map_or_else(|| NA.to_owned(), |d| format!("{d:+.2}"));
    let marker = match row.delta {
        Some(d) if row.highlighted && d > 0.0 => Some(RISE),
        Some(d) if row.highlighted && d < 0.0 => Some(FALL),
        _ => None,
    };
    Cells {
        n,
        value,
        ci,
        grade,
        change,
        marker,
    }
}

fn title(doc: &ReportDocument) -> String {
    format!("UX KPI report {}", doc.spec.period)
}

fn intro(doc: &ReportDocument) -> String {
    format!(
        "Compared with {}. Intervals at {} confidence; {RISE} and {FALL} mark significant rises and falls (alpha = {}).",
        doc.spec.baseline,
        level(doc),
        doc.alpha
    )
}

fn level(doc: &ReportDocument) -> String {
    let pct = ((1.0 - doc.alpha) * 100.0 * 1e6).round() / 1e6;
    format!("{pct}%")
}

fn footer(doc: &ReportDocument) -> String {
    format!("Comment sample seed: {}.", doc.spec.seed)
}

fn comment_note(s: &ProductSection) -> String {
    format!("Showing {} of {}.", s.comments.len(), s.comment_pool)
}

fn sign(p: Polarity) -> &'static str {
    match p {
        Polarity::Positive => "(+)",
        Polarity::Negative => "(-)",
    }
}

fn rows_of<'a>(s: &'a ProductSection, kinds: &'a [KpiKind]) -> impl Iterator<Item = &'a KpiRow> + 'a {
    kinds.iter().filter_map(|k| s.row(*k))
}

fn md_escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('|', "\\|")
        .replace(['\r', '\n'], " ")
}

pub fn render_markdown(doc: &ReportDocument) -> Vec<u8> {
    let mut out = String::new();
    let base = doc.spec.baseline;
    let head = |first: &str| {
        format!(
            "| {first}KPI | n | Value | {} CI | Grade | Change vs {base} |\n|{}---|--:|------:|--------|-------|---|\n",
            level(doc),
            if first.is_empty() { "" } else { "---|" },
        )
    };
    let line = |prefix: &str, row: &KpiRow| {
        let c = cells(row);
        let change = match c.marker {
            Some(m) => format!("{} {m}", c.change),
            None => c.change,
        };
        format!(
            "| {prefix}{} | {} | {} | {} | {} | {} |\n",
            kind_label(row.kind),
            c.n,
            c.value,
            c.ci,
            md_escape(&c.grade),
            change
        )
    };

    let _ = write!(out, "# {}\n\n{}\n", title(doc), intro(doc));
    for s in &doc.sections {
        let _ = write!(out, "\n## {}\n\n{}", md_escape(&s.product_id), head(""));
        for row in rows_of(s, &HEADLINE_KINDS) {
            out.push_str(&line("", row));
        }
        out.push_str("\n### Comments\n\n");
        if s.comments.is_empty() {
            out.push_str("No comments.\n");
        } else {
            let _ = writeln!(out, "{}\n", comment_note(s));
            for c in &s.comments {
                let _ = writeln!(out, "- {} {}", sign(c.polarity), md_escape(&c.text));
            }
        }
    }
    if !doc.sections.is_empty() {
        let _ = write!(out, "\n## Appendix: UEQ-S subscales\n\n{}", head("Product | "));
        for s in &doc.sections {
            for row in rows_of(s, &APPENDIX_KINDS) {
                out.push_str(&line(&format!("{} | ", md_escape(&s.product_id)), row));
            }
        }
    }
    let _ = write!(out, "\n---\n\n{}\n", footer(doc));
    out.into_bytes()
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;max-width:60em;margin:auto}\
table{border-collapse:collapse}th,td{padding:.2em .6em;border-bottom:1px solid #ccc}\
td.num{text-align:right}.rise{color:#1a7f37}.fall{color:#cf222e}";

pub fn render_html(doc: &ReportDocument) -> Vec<u8> {
    let mut out = String::new();
    let base = doc.spec.baseline;
    let head = |product: bool| {
        format!(
            "<thead><tr>{}<th>KPI</th><th>n</th><th>Value</th><th>{} CI</th><th>Grade</th><th>Change vs {base}</th></tr></thead>\n",
            if product { "<th>Product</th>" } else { "" },
            level(doc),
        )
    };
    let line = |product: Option<&str>, row: &KpiRow| {
        let c = cells(row);
        let change = match c.marker {
            Some(m) => {
                let class = if m == RISE { "rise" } else { "fall" };
                format!("<td class=\"{class}\">{} {m}</td>", esc(&c.change))
            }
            None => format!("<td>{}</td>", esc(&c.change)),
        };
        format!(
            "<tr>{}<td>{}</td><td class=\"num\">{}</td><td class=\"num\">{}</td><td>{}</td><td>{}</td>{change}</tr>\n",
            product.map_or_else(String::new, |p| format!("<td>{}</td>", esc(p))),
            kind_label(row.kind),
            c.n,
            esc(&c.value),
            esc(&c.ci),
            esc(&c.grade),
        )
    };

    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n<title>{t}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<h1>{t}</h1>\n<p>{}</p>\n",
        esc(&intro(doc)),
        t = esc(&title(doc)),
    );
    for s in &doc.sections {
        let _ = write!(out, "<section>\n<h2>{}</h2>\n<table>\n{}<tbody>\n", esc(&s.product_id), head(false));
        for row in rows_of(s, &HEADLINE_KINDS) {
            out.push_str(&line(None, row));
        }
        out.push_str("</tbody>\n</table>\n<h3>Comments</h3>\n");
        if s.comments.is_empty() {
            out.push_str("<p>No comments.</p>\n");
        } else {
            let _ = writeln!(out, "<p>{}</p>\n<ul>", comment_note(s));
            for c in &s.comments {
                let _ = writeln!(out, "<li>{} {}</li>", sign(c.polarity), esc(&c.text));
            }
            out.push_str("</ul>\n");
        }
        out.push_str("</section>\n");
    }
    if !doc.sections.is_empty() {
        let _ = write!(
            out,
            "<section>\n<h2>Appendix: UEQ-S subscales</h2>\n<table>\n{}<tbody>\n",
            head(true)
        );
        for s in &doc.sections {
            for row in rows_of(s, &APPENDIX_KINDS) {
                out.push_str(&line(Some(&s.product_id), row));
            }
        }
        out.push_str("</tbody>\n</table>\n</section>\n");
    }
    let _ = write!(out, "<footer>\n<p>{}</p>\n</footer>\n</body>\n</html>\n", esc(&footer(doc)));
    out.into_bytes()
}
