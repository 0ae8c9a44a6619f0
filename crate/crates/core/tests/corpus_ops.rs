use sciex_core::corpus::{split_plaintext, Corpus, IngestOptions, LibraryId, Scope, SideKind};
use sciex_core::Error;

const TWO_SECTIONS: &[u8] = include_bytes!("../fixtures/tei/two_sections.tei.xml");
const MISSING_TITLE: &[u8] = include_bytes!("../fixtures/tei/missing_title.tei.xml");
const RICH: &[u8] = include_bytes!("../fixtures/tei/rich.tei.xml");

fn corpus_with_library() -> (Corpus, LibraryId) {
    let mut c = Corpus::default();
    let id = c.create_library("case study").unwrap().id.clone();
    (c, id)
}

fn body_p_count(xml: &[u8]) -> usize {
    // crude independent count: <p> elements between <body> and </body>
    let s = std::str::from_utf8(xml).unwrap();
    let body = &s[s.find("<body>").unwrap()..s.find("</body>").unwrap()];
    body.matches("<p>").count()
}

#[test]
fn two_div_fixture_gives_expected_shape() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_tei(&lib, TWO_SECTIONS, None, IngestOptions::default()).unwrap();
    assert!(out.created);
    let paper = c.paper(&out.paper_id).unwrap();
    assert_eq!(paper.sections.len(), 2);
    assert_eq!(paper.paragraph_count(), 5);
    assert_eq!(paper.paragraph_count(), body_p_count(TWO_SECTIONS));
    let idx: Vec<Vec<usize>> = paper
        .sections
        .iter()
        .map(|s| s.paragraphs.iter().map(|p| p.para_index).collect())
        .collect();
    assert_eq!(idx, vec![vec![0, 1, 2], vec![0, 1]]);
    assert_eq!(paper.sections[0].heading, "Introduction");
    assert_eq!(paper.sections[1].heading, "Experimental setup");

    let m = &paper.metadata;
    assert_eq!(m.title, "In-situ Melt Pool Monitoring for Laser Powder Bed Fusion");
    assert_eq!(m.authors, vec!["Ada Lindqvist", "Tomas J Okafor"]);
    assert_eq!(m.date.as_deref(), Some("2021-06-15"));
    assert_eq!(m.doi.as_deref(), Some("10.1234/example.2021.001"));
    assert!(!paper.needs_review);
}

#[test]
fn empty_title_statement_needs_review() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_tei(&lib, MISSING_TITLE, None, IngestOptions::default()).unwrap();
    let paper = c.paper(&out.paper_id).unwrap();
    assert!(paper.needs_review);
    assert_eq!(paper.metadata.title, "");
    assert_eq!(paper.paragraph_count(), 1);
}

#[test]
fn abstract_section_and_side_records() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_tei(&lib, RICH, None, IngestOptions::default()).unwrap();
    let paper = c.paper(&out.paper_id).unwrap().clone();
    let headings: Vec<&str> = paper.sections.iter().map(|s| s.heading.as_str()).collect();
    assert_eq!(headings, vec!["Abstract", "Sensing", "Model"]);
    assert_eq!(paper.paragraph_count(), 1 + body_p_count(RICH));
    let kinds: Vec<SideKind> = paper.side_records.iter().map(|r| r.kind).collect();
    assert!(kinds.contains(&SideKind::Formula));
    assert!(kinds.contains(&SideKind::Figure));
    assert!(kinds.contains(&SideKind::Table));
    assert!(kinds.contains(&SideKind::Reference));
    assert!(paper.paragraphs().all(|p| !p.text.contains("h = k")));

    let without = IngestOptions {
        abstract_as_section: false,
    };
    let (mut c2, lib2) = corpus_with_library();
    let out2 = c2.ingest_tei(&lib2, RICH, None, without).unwrap();
    assert_eq!(c2.paper(&out2.paper_id).unwrap().sections.len(), 2);
}

#[test]
fn ingest_is_deterministic_and_deduplicated() {
    let lib = LibraryId::from("fixed");
    let mut a = Corpus::default();
    let mut b = Corpus::default();
    for c in [&mut a, &mut b] {
        c.insert_library(sciex_core::corpus::Library::with_id(lib.clone(), "x").unwrap());
    }
    let pa = a.ingest_tei(&lib, TWO_SECTIONS, None, IngestOptions::default()).unwrap();
    let pb = b.ingest_tei(&lib, TWO_SECTIONS, None, IngestOptions::default()).unwrap();
    let (pa, pb) = (a.paper(&pa.paper_id).unwrap(), b.paper(&pb.paper_id).unwrap());
    assert_eq!(serde_json::to_vec(pa).unwrap(), serde_json::to_vec(pb).unwrap());

    let again = a.ingest_tei(&lib, TWO_SECTIONS, None, IngestOptions::default()).unwrap();
    assert!(!again.created);
    assert_eq!(a.library(&lib).unwrap().paper_ids.len(), 1);
}

#[test]
fn malformed_and_empty_documents_rejected() {
    let (mut c, lib) = corpus_with_library();
    let broken = b"<TEI xmlns=\"http://www.tei-c.org/ns/1.0\"><text><body><p>x</body></TEI>";
    match c.ingest_tei(&lib, broken, None, IngestOptions::default()) {
        Err(Error::MalformedXml { position, .. }) => assert!(position > 0),
        other => panic!("expected malformed xml, got {other:?}"),
    }
    let empty = b"<TEI xmlns=\"http://www.tei-c.org/ns/1.0\"><text><body><div><p>  </p></div></body></text></TEI>";
    assert!(matches!(
        c.ingest_tei(&lib, empty, None, IngestOptions::default()),
        Err(Error::EmptyDocument)
    ));
}

#[test]
fn plaintext_splitting() {
    assert_eq!(split_plaintext("A\n\nB\n\nC"), vec!["A", "B", "C"]);
    assert_eq!(split_plaintext("A"), vec!["A"]);
    assert_eq!(split_plaintext("A\r\n\r\nB\r\n\r\nC"), split_plaintext("A\n\nB\n\nC"));
    let (mut c, lib) = corpus_with_library();
    assert!(matches!(
        c.ingest_plaintext(&lib, "t", " \n\t\n ", None),
        Err(Error::EmptyText)
    ));
    let out = c.ingest_plaintext(&lib, "Notes", "first  line\nwraps\n\nsecond", None).unwrap();
    let paper = c.paper(&out.paper_id).unwrap();
    assert_eq!(paper.sections.len(), 1);
    let texts: Vec<&str> = paper.paragraphs().map(|p| p.text.as_str()).collect();
    assert_eq!(texts, vec!["first line wraps", "second"]);
}

#[test]
fn correction_semantics() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_plaintext(&lib, "t", "teh laser\n\nsecond", None).unwrap();
    let before: Vec<_> = c.get_paragraphs(&out.paper_id).unwrap().into_iter().cloned().collect();
    let id = before[0].id.clone();

    let same = c.correct_paragraph(&id, "teh laser").unwrap();
    assert!(!same.changed());
    assert!(!same.paragraph.edited);

    let fix = c.correct_paragraph(&id, "the laser").unwrap();
    assert!(fix.changed() && fix.paragraph.edited);
    assert_eq!(fix.paragraph.text, "the laser");
    assert!(c.paragraph(&id).is_err());
    let after = c.get_paragraphs(&out.paper_id).unwrap();
    assert_eq!(after.len(), before.len());
    assert_eq!(after[0].id, fix.paragraph.id);
    assert_eq!(after[1].id, before[1].id);

    assert!(matches!(c.correct_paragraph(&fix.paragraph.id, "  "), Err(Error::EmptyText)));
    assert!(matches!(
        c.correct_paragraph(&id, "x"),
        Err(Error::NotFound { .. })
    ));
}

#[test]
fn text_search_matches_brute_force() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_tei(&lib, RICH, None, IngestOptions::default()).unwrap();
    c.ingest_tei(&lib, TWO_SECTIONS, None, IngestOptions::default()).unwrap();

    let hits = c.text_search(&Scope::Paper(out.paper_id.clone()), "sensor", false).unwrap();
    let sensing = hits
        .iter()
        .find(|h| h.paragraph.text.contains("force sensor"))
        .unwrap();
    assert!(sensing.spans.len() >= 3);
    for s in &sensing.spans {
        assert_eq!(sensing.paragraph.text[s.start..s.end].to_lowercase(), "sensor");
    }

    let upper = c.text_search(&Scope::Paper(out.paper_id.clone()), "Sensor", false).unwrap();
    assert_eq!(upper, hits);
    assert!(c
        .text_search(&Scope::Paper(out.paper_id.clone()), "Sensor", true)
        .unwrap()
        .is_empty());
    assert!(c.text_search(&Scope::Library(lib.clone()), "zirconium", false).unwrap().is_empty());

    for needle in ["the", "laser", "e", "sensor"] {
        let got: Vec<_> = c
            .text_search(&Scope::Library(lib.clone()), needle, true)
            .unwrap()
            .into_iter()
            .map(|h| (h.paragraph.id, h.spans.len()))
            .collect();
        let oracle: Vec<_> = c
            .scope_paragraphs(&Scope::Library(lib.clone()))
            .unwrap()
            .into_iter()
            .filter(|p| p.text.contains(needle))
            .map(|p| (p.id.clone(), p.text.matches(needle).count()))
            .collect();
        assert_eq!(got, oracle, "needle {needle}");
    }
}

#[test]
fn listing_unknown_paper_fails() {
    let c = Corpus::default();
    assert!(matches!(
        c.get_paragraphs(&"nope".into()),
        Err(Error::NotFound { .. })
    ));
}

#[test]
fn duplicates_flagged_not_removed() {
    let (mut c, lib) = corpus_with_library();
    let out = c.ingest_plaintext(&lib, "t", "same\n\nother\n\nsame", None).unwrap();
    let flags: Vec<bool> = c
        .get_paragraphs(&out.paper_id)
        .unwrap()
        .iter()
        .map(|p| p.duplicate)
        .collect();
    assert_eq!(flags, vec![false, false, true]);
}
