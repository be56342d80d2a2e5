use super::*;
use crate::config::AnalyticsConfig;
use crate::ingest::StoreSnapshot;
use crate::survey::{codes, Channel, SurveyResponse};
use chrono::{TimeZone, Utc};

fn q(s: &str) -> Quarter {
    s.parse().unwrap()
}

fn resp(id: String, product: &str, month: u32) -> SurveyResponse {
    SurveyResponse::new(
        id,
        product,
        Utc.with_ymd_and_hms(2024, month, 10, 9, 0, 0).unwrap(),
        Channel::InAppButton,
    )
}

/// `n` PSAT answers of which `satisfied` are 4 and the rest 1.
fn psat(product: &str, month: u32, n: usize, satisfied: usize) -> Vec<SurveyResponse> {
    (0..n)
        .map(|i| {
            resp(format!("{product}-{month}-{i}"), product, month)
                .with_answer(codes::PSAT, if i < satisfied { 4 } else { 1 })
        })
        .collect()
}

fn engine(rs: Vec<SurveyResponse>) -> Analytics {
    Analytics::new(StoreSnapshot::from_responses(rs), AnalyticsConfig::default())
}

fn spec() -> ReportSpec {
    ReportSpec::new(q("2024-Q2"), q("2024-Q1"))
}

fn text(doc: &ReportDocument) -> String {
    String::from_utf8(doc.rendered.clone()).unwrap()
}

#[test]
fn significant_rise_is_flagged() {
    let mut rs = psat("p", 2, 100, 60);
    rs.extend(psat("p", 5, 100, 80));
    let doc = build_report(&engine(rs), &spec()).unwrap();
    let row = doc.sections[0].row(KpiKind::Psat).unwrap();
    assert!(row.significant && row.highlighted);
    assert!((row.delta.unwrap() - 20.0).abs() < 1e-12);
    let z = row.comparison.as_ref().unwrap().outcome.statistic;
    assert!(z > 1.96, "{z}");
    let md = text(&doc);
    assert!(md.contains("| PSAT | 100 | 80.00 |"), "{md}");
    assert!(md.contains("+20.00 ▲"));
    let flagged: Vec<_> = doc.manifest.iter().filter(|m| m.significant).collect();
    assert_eq!(flagged.len(), 1);
    assert_eq!(flagged[0].kind, KpiKind::Psat);
}

#[test]
fn significant_fall_gets_its_own_marker() {
    let mut rs = psat("p", 2, 100, 80);
    rs.extend(psat("p", 5, 100, 60));
    let md = text(&build_report(&engine(rs), &spec()).unwrap());
    assert!(md.contains("-20.00 ▼"));
    assert!(!md.contains("-20.00 ▲"));
}

#[test]
fn missing_baseline_renders_not_applicable() {
    let doc = build_report(&engine(psat("p", 5, 20, 15)), &spec()).unwrap();
    let row = doc.sections[0].row(KpiKind::Psat).unwrap();
    assert_eq!(row.delta, None);
    assert!(!row.significant);
    assert!(doc.manifest.iter().all(|m| !m.significant && m.delta.is_none()));
    assert!(text(&doc).contains("| PSAT | 20 | 75.00 | 56.02 to 93.98 | n/a | n/a |"));
}

#[test]
fn identical_quarters_show_zero_change() {
    let mut rs = psat("p", 2, 30, 20);
    rs.extend(psat("p", 5, 30, 20));
    let doc = build_report(&engine(rs), &spec()).unwrap();
    let row = doc.sections[0].row(KpiKind::Psat).unwrap();
    assert_eq!(row.delta, Some(0.0));
    assert!(doc.manifest.iter().all(|m| !m.significant));
    assert!(text(&doc).contains("+0.00 |"));
}

#[test]
fn suppressed_cells_and_no_flags() {
    let mut rs = psat("p", 2, 100, 10);
    rs.extend(psat("p", 5, 3, 3));
    let doc = build_report(&engine(rs), &spec()).unwrap();
    let row = doc.sections[0].row(KpiKind::Psat).unwrap();
    assert!(row.current.as_ref().unwrap().suppressed);
    assert!(!row.significant && row.delta.is_none());
    assert!(text(&doc).contains("| PSAT | 3 | insufficient data | n/a | n/a | n/a |"));
    // kinds without any answers render the same way
    assert!(text(&doc).contains("| NPS | 0 | insufficient data |"));
}

#[test]
fn degenerate_change_has_delta_but_no_verdict() {
    let mut rs = psat("p", 2, 10, 10);
    rs.extend(psat("p", 5, 10, 10));
    let row = build_report(&engine(rs), &spec()).unwrap().sections[0]
        .row(KpiKind::Psat)
        .cloned()
        .unwrap();
    assert_eq!(row.delta, Some(0.0));
    assert!(row.comparison.is_none() && !row.significant);
}

#[test]
fn report_numbers_are_the_analytics_numbers() {
    let mut rs = psat("a", 2, 40, 21);
    rs.extend(psat("a", 5, 44, 37));
    rs.extend(psat("b", 5, 12, 5));
    let a = engine(rs);
    let doc = build_report(&a, &spec()).unwrap();
    for s in &doc.sections {
        for row in &s.rows {
            let f = FilterSpec::default().for_product(&s.product_id);
            let series = a.kpi_series(&f, row.kind).unwrap();
            let from_series = |quarter| {
                series
                    .first()
                    .and_then(|x| x.points.iter().find(|p| p.quarter == quarter).cloned())
            };
            assert_eq!(row.current, from_series(spec().period));
            assert_eq!(row.baseline, from_series(spec().baseline));
            if let Some(c) = &row.comparison {
                let direct = a
                    .compare(&f.in_quarter(spec().period), &f.in_quarter(spec().baseline), row.kind)
                    .unwrap();
                assert_eq!(c, &direct);
            }
        }
    }
}

#[test]
fn manifest_flags_match_comparisons() {
    let mut rs = psat("a", 2, 100, 60);
    rs.extend(psat("a", 5, 100, 80));
    rs.extend(psat("b", 2, 50, 25));
    rs.extend(psat("b", 5, 50, 27));
    let doc = build_report(&engine(rs), &spec()).unwrap();
    for m in &doc.manifest {
        let row = doc
            .sections
            .iter()
            .find(|s| s.product_id == m.product_id)
            .and_then(|s| s.row(m.kind))
            .unwrap();
        if m.significant {
            assert!(row.comparison.as_ref().unwrap().outcome.significant);
        }
    }
    assert_eq!(doc.manifest.len(), 2 * 6);
}

#[test]
fn substantive_threshold_limits_highlights() {
    let mut rs = psat("p", 2, 100, 60);
    rs.extend(psat("p", 5, 100, 80));
    let mut config = AnalyticsConfig::default();
    config.highlight_min_delta.insert(KpiKind::Psat, 25.0);
    let a = Analytics::new(StoreSnapshot::from_responses(rs), config);
    let doc = build_report(&a, &spec()).unwrap();
    let row = doc.sections[0].row(KpiKind::Psat).unwrap();
    assert!(row.significant && !row.highlighted);
    assert!(!text(&doc).contains('▲'.to_string().as_str()) || text(&doc).matches('▲').count() == 1);
}

#[test]
fn invalid_requests_are_rejected() {
    let a = engine(psat("p", 2, 10, 5));
    assert!(matches!(build_report(&a, &spec()), Err(ReportError::EmptyPeriod(_))));
    let mut s = spec();
    s.products.insert("ghost".into());
    assert!(matches!(build_report(&a, &s), Err(ReportError::UnknownProduct(p)) if p == "ghost"));
    let backwards = ReportSpec::new(q("2024-Q1"), q("2024-Q2"));
    assert!(matches!(build_report(&a, &backwards), Err(ReportError::InvalidSpec(_))));
    let same = ReportSpec::new(q("2024-Q1"), q("2024-Q1"));
    assert!(matches!(build_report(&a, &same), Err(ReportError::InvalidSpec(_))));
}

#[test]
fn product_selection() {
    let mut rs = psat("a", 5, 10, 5);
    rs.extend(psat("b", 5, 10, 5));
    rs.extend(psat("c", 2, 10, 5));
    let a = engine(rs);
    let all = build_report(&a, &spec()).unwrap();
    let ids: Vec<_> = all.sections.iter().map(|s| s.product_id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
    let mut only = spec();
    only.products.insert("b".into());
    assert_eq!(build_report(&a, &only).unwrap().sections.len(), 1);
    // a product known to the store but silent in the period gets a page of gaps
    only.products.insert("c".into());
    let doc = build_report(&a, &only).unwrap();
    assert_eq!(doc.sections[1].product_id, "c");
    assert!(doc.sections[1].rows.iter().all(|r| r.current.is_none()));
}

fn with_comments(n: usize) -> Vec<SurveyResponse> {
    psat("p", 5, n, n / 2)
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.comment_positive = Some(format!("liked {i}"));
            if i % 3 == 0 {
                r.comment_negative = Some(format!("disliked {i} | <b>&</b>"));
            }
            r
        })
        .collect()
}

#[test]
fn comment_sampling_is_seeded() {
    let a = engine(with_comments(12));
    let mut s = spec();
    s.seed = 7;
    let first = build_report(&a, &s).unwrap();
    let again = build_report(&a, &s).unwrap();
    assert_eq!(first.rendered, again.rendered);
    let section = &first.sections[0];
    assert_eq!(section.comments.len(), 5);
    assert_eq!(section.comment_pool, 16);
    let mut seen = BTreeSet::new();
    for c in &section.comments {
        assert!(seen.insert((c.response_id.clone(), c.polarity as u8)), "sampled twice");
    }
    assert!(text(&first).contains("Comment sample seed: 7."));

    let differs = (8..40).any(|seed| {
        s.seed = seed;
        build_report(&a, &s).unwrap().sections[0].comments != section.comments
    });
    assert!(differs);

    s.comment_sample_size = 100;
    assert_eq!(build_report(&a, &s).unwrap().sections[0].comments.len(), 16);
}

#[test]
fn comments_are_escaped() {
    let a = engine(with_comments(12));
    let mut s = spec();
    s.comment_sample_size = 100;
    let md = text(&build_report(&a, &s).unwrap());
    assert!(md.contains("disliked 0 \\| <b>&</b>"));
    s.output_format = OutputFormat::Html;
    let html = text(&build_report(&a, &s).unwrap());
    assert!(html.contains("disliked 0 | &lt;b&gt;&amp;&lt;/b&gt;"));
}

#[test]
fn empty_document_is_header_only() {
    let doc = ReportDocument {
        spec: spec(),
        alpha: 0.05,
        sections: Vec::new(),
        manifest: Vec::new(),
        rendered: Vec::new(),
    };
    let md = String::from_utf8(render_markdown(&doc)).unwrap();
    assert!(md.starts_with("# UX KPI report 2024-Q2\n"));
    assert!(!md.contains("##"));
    assert!(!md.contains('|'));
    assert!(md.contains("95% confidence"));
    let html = String::from_utf8(render_html(&doc)).unwrap();
    assert!(!html.contains("<table>"));
}

fn assert_well_formed(html: &str) {
    use quick_xml::events::Event;
    let mut reader = quick_xml::Reader::from_str(html);
    let mut stack = Vec::new();
    loop {
        match reader.read_event() {
            Ok(Event::Start(e)) => stack.push(e.name().as_ref().to_vec()),
            Ok(Event::End(e)) => assert_eq!(stack.pop().as_deref(), Some(e.name().as_ref())),
            Ok(Event::Eof) => break,
            Ok(_) => {}
            Err(e) => panic!("malformed at {}: {e}", reader.buffer_position()),
        }
    }
    assert!(stack.is_empty(), "unclosed {:?}", stack);
}

#[test]
fn html_is_well_formed() {
    let mut rs = with_comments(12);
    rs.extend(psat("p", 2, 100, 10));
    rs.extend(psat("q", 5, 2, 1));
    let mut s = spec();
    s.output_format = OutputFormat::Html;
    let doc = build_report(&engine(rs), &s).unwrap();
    let html = text(&doc);
    assert!(html.starts_with("<!DOCTYPE html>"));
    assert_well_formed(&html);
    assert_well_formed(&String::from_utf8(render_html(&ReportDocument {
        sections: Vec::new(),
        manifest: Vec::new(),
        ..doc
    }))
    .unwrap());
}
