use sciex_core::classifier::{Category, LabelRecord};
use sciex_core::corpus::Scope;
use sciex_core::embedding::HashEmbedder;
use sciex_core::query::{StubLlm, StubMode};
use sciex_core::retrieval::Polarity;
use sciex_core::workbench::{
    AnswerSource, ExportRequest, Page, QueryRequest, TrainRequest, Upload,
};
use sciex_core::{Error, Workbench, Workspace};

const TWO_SECTIONS: &str = include_str!("../fixtures/tei/two_sections.tei.xml");
const RICH: &str = include_str!("../fixtures/tei/rich.tei.xml");

fn open(dir: &std::path::Path) -> Workbench {
    Workbench::new(
        Workspace::open(dir).unwrap(),
        Box::new(HashEmbedder::new()),
        Box::new(StubLlm::new(StubMode::EchoFirstPassage)),
    )
}

fn tei(content: &str) -> Upload {
    Upload::Tei {
        content: content.to_owned(),
        original_uri: None,
    }
}

#[test]
fn order_and_labels_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (paper_id, order, spec_id) = {
        let wb = open(dir.path());
        let lib = wb.create_library("lib").unwrap().id;
        let paper = wb.ingest(&lib, tei(TWO_SECTIONS)).unwrap().paper;
        let order: Vec<_> = paper.paragraphs().map(|p| p.id.clone()).collect();
        let spec = &wb.import_defaults().unwrap()[0];
        wb.label_paragraph(&spec.id, &order[4], Polarity::Positive).unwrap();
        wb.rank(&spec.id, &Scope::Paper(paper.id.clone()), 5).unwrap();
        (paper.id, order, spec.id.clone())
    };
    let wb = open(dir.path());
    let again: Vec<_> = wb.get_paper(&paper_id).unwrap().paragraphs().map(|p| p.id.clone()).collect();
    assert_eq!(again, order);
    assert_eq!(wb.get_retrieval(&spec_id).unwrap().positive_paragraph_ids, vec![order[4].clone()]);
    assert!(dir.path().join("cache/embeddings.bin").exists());
}

#[test]
fn upload_grows_listing_once() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    let lib = wb.create_library("lib").unwrap().id;
    assert_eq!(wb.list_papers(&lib, Page::default()).unwrap().len(), 0);
    assert!(wb.ingest(&lib, tei(TWO_SECTIONS)).unwrap().created);
    assert_eq!(wb.list_papers(&lib, Page::default()).unwrap().len(), 1);
    assert!(!wb.ingest(&lib, tei(TWO_SECTIONS)).unwrap().created);
    assert_eq!(wb.list_papers(&lib, Page::default()).unwrap().len(), 1);
}

#[test]
fn rank_reflects_negative_feedback() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    let lib = wb.create_library("lib").unwrap().id;
    let paper = wb.ingest(&lib, tei(RICH)).unwrap().paper;
    let spec = wb
        .import_defaults()
        .unwrap()
        .into_iter()
        .find(|s| s.category == Some(Category::Sensing))
        .unwrap();
    let scope = Scope::Paper(paper.id.clone());
    let first = wb.rank(&spec.id, &scope, 5).unwrap();
    let top = first[0].clone();
    wb.label_paragraph(&spec.id, &top.paragraph_id, Polarity::Negative).unwrap();
    let second = wb.rank(&spec.id, &scope, 5).unwrap();
    let after = second.iter().find(|h| h.paragraph_id == top.paragraph_id).unwrap();
    assert!(after.score < top.score);
}

#[test]
fn export_then_train_matches_direct_train() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    let lib = wb.create_library("lib").unwrap().id;
    let a = wb.ingest(&lib, tei(TWO_SECTIONS)).unwrap().paper;
    let b = wb.ingest(&lib, tei(RICH)).unwrap().paper;
    let paras: Vec<_> = a.paragraphs().chain(b.paragraphs()).map(|p| p.id.clone()).collect();
    for (i, id) in paras.iter().enumerate() {
        let c = Category::ALL[i % 4];
        wb.set_label(LabelRecord::new(id.clone(), [c], false).unwrap()).unwrap();
    }

    let mut export = ExportRequest::new(lib.clone());
    export.seed = 9;
    let exported = wb.export_dataset(&export).unwrap();
    assert_eq!(exported.records.len(), paras.len());
    assert_eq!(exported.train + exported.test, paras.len());

    let mut direct = TrainRequest::from_library(lib.clone());
    direct.seed = 9;
    let d = wb.train(direct).unwrap();
    let mut piped = TrainRequest::from_lines(exported.records);
    piped.seed = 9;
    let p = wb.train(piped).unwrap();
    assert_ne!(d.model_id, p.model_id);
    let md = wb.model(Some(&d.model_id)).unwrap().model;
    let mp = wb.model(Some(&p.model_id)).unwrap().model;
    assert_eq!(md.heads, mp.heads);
    assert_eq!(d.report, p.report);
    assert_eq!(wb.report(None).unwrap(), p.report.unwrap());
}

#[test]
fn query_sources() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    let lib = wb.create_library("lib").unwrap().id;
    let paper = wb.ingest(&lib, tei(RICH)).unwrap().paper;
    let spec = wb.import_defaults().unwrap()[0].clone();
    let req = |source| QueryRequest {
        query: "Which sensor is sampled?".into(),
        source,
        scope: paper.id.to_string(),
        k: 2,
        threshold: 0.5,
    };
    let a = wb.answer(&req(AnswerSource::Retrieval(spec.id.clone()))).unwrap();
    assert_eq!(a.used_passages.len(), 2);
    let s = wb.answer(&req(AnswerSource::Semantic)).unwrap();
    assert!(s.text.contains("force sensor"));
    assert!(matches!(
        wb.answer(&req(AnswerSource::Class(Category::Data))),
        Err(Error::NotFound { .. })
    ));
}

#[test]
fn read_only_snapshot_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let wb = open(dir.path());
    let snap = wb.snapshot();
    wb.create_library("later").unwrap();
    assert_eq!(snap.corpus.libraries().count(), 0);
    assert_eq!(wb.list_libraries(Page::default()).len(), 1);
    assert!(matches!(Workspace::open(dir.path()), Err(Error::Locked(_))));
}
