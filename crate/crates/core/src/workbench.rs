//! The whole workflow behind one handle: a workspace plus the active
//! embedding and LLM providers. The CLI and the HTTP service are thin
//! layers over these methods, and every response type here serializes to
//! the JSON they emit.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::Utc;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    build_dataset, evaluate, Category, ClassificationReport, Dataset, DatasetLine, LabelClassifier,
    LabelRecord, LabeledRow, LinearLabelModel, TrainConfig, NUM_CATEGORIES,
};
use crate::config::Config;
use crate::corpus::{
    Correction, IngestOptions, Library, LibraryId, ModelId, Paper, PaperId, Paragraph, ParagraphId,
    RetrievalId, Scope, SearchHit,
};
use crate::embedding::{embed_cached, EmbeddingProvider, EmbeddingVector, Provenance};
use crate::error::{Error, Result};
use crate::query::{self, classifier_passages, Answer, ClassifiedCandidate, LlmProvider};
use crate::retrieval::{
    default_drafts, rank_candidates, retrieval_embedding, Candidate, Ensembles, Polarity,
    RankedHit, RetrievalDraft, RetrievalSpec, Weights, DEFAULT_K,
};
use crate::store::{Snapshot, StoredModel, Workspace};

pub const DEFAULT_LIMIT: usize = 100;
pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const EXCERPT_CHARS: usize = 80;

fn default_k() -> usize {
    DEFAULT_K
}

fn default_limit() -> usize {
    DEFAULT_LIMIT
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default)]
    pub offset: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self {
            limit: DEFAULT_LIMIT,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySummary {
    pub id: LibraryId,
    pub name: String,
    pub created_at: chrono::DateTime<Utc>,
    pub paper_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperSummary {
    pub id: PaperId,
    pub title: String,
    pub paragraph_count: usize,
    pub needs_review: bool,
}

/// An uploaded document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase")]
pub enum Upload {
    Tei {
        content: String,
        #[serde(default)]
        original_uri: Option<String>,
    },
    Text {
        #[serde(default)]
        title: String,
        content: String,
        #[serde(default)]
        original_uri: Option<String>,
    },
}

impl Upload {
    /// Picks the format from the file extension; `.xml` means TEI.
    pub fn from_file(name: &str, content: String) -> Self {
        let lower = name.to_lowercase();
        if lower.ends_with(".xml") {
            Upload::Tei {
                content,
                original_uri: Some(name.to_owned()),
            }
        } else {
            let title = std::path::Path::new(name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Upload::Text {
                title,
                content,
                original_uri: Some(name.to_owned()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestResponse {
    /// False when identical content was already in the library.
    pub created: bool,
    pub paper: Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Text,
    Semantic,
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(SearchMode::Text),
            "semantic" => Ok(SearchMode::Semantic),
            other => Err(Error::InvalidArgument(format!(
                "unknown search mode `{other}` (text, semantic)"
            ))),
        }
    }
}

/// A ranked paragraph with enough context to display it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub rank: usize,
    pub score: f64,
    pub display_score: String,
    pub paragraph_id: ParagraphId,
    pub paper_id: PaperId,
    pub section_index: usize,
    pub para_index: usize,
    pub excerpt: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "hits", rename_all = "lowercase")]
pub enum SearchResponse {
    Text(Vec<SearchHit>),
    Semantic(Vec<Hit>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRequest {
    pub library: LibraryId,
    #[serde(default)]
    pub include_irrelevant: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub with_embeddings: bool,
}

impl ExportRequest {
    pub fn new(library: LibraryId) -> Self {
        Self {
            library,
            include_irrelevant: false,
            seed: 0,
            test_fraction: DEFAULT_TEST_FRACTION,
            with_embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportResponse {
    pub provenance: Provenance,
    pub seed: u64,
    pub test_fraction: f64,
    pub train: usize,
    pub test: usize,
    pub records: Vec<DatasetLine>,
}

/// Train either from a library's labels or from exported dataset lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRequest {
    #[serde(default)]
    pub library: Option<LibraryId>,
    #[serde(default)]
    pub dataset: Option<Vec<DatasetLine>>,
    #[serde(default)]
    pub include_irrelevant: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub config: TrainConfig<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl TrainRequest {
    pub fn from_library(library: LibraryId) -> Self {
        Self {
            library: Some(library),
            dataset: None,
            include_irrelevant: false,
            seed: 0,
            test_fraction: DEFAULT_TEST_FRACTION,
            config: TrainConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn from_lines(lines: Vec<DatasetLine>) -> Self {
        Self {
            library: None,
            dataset: Some(lines),
            ..Self::from_library(LibraryId::from(""))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResponse {
    pub model_id: ModelId,
    pub train_records: usize,
    pub test_records: usize,
    pub degenerate_heads: Vec<Category>,
    pub final_loss: f64,
    pub report: Option<ClassificationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictInput {
    Paragraph { paragraph_id: ParagraphId },
    Text { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    #[serde(flatten)]
    pub input: PredictInput,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub model: Option<ModelId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model_id: ModelId,
    pub paragraph_id: Option<ParagraphId>,
    /// Indexed by category: data, sensing, model, system.
    pub probabilities: [f64; NUM_CATEGORIES],
    pub labels: BTreeSet<Category>,
}

/// Where answering draws its passages from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AnswerSource {
    /// Top-k of a stored retrieval.
    Retrieval(RetrievalId),
    /// Top-k semantic search with the question itself.
    Semantic,
    /// Paragraphs the active model predicts positive for a category.
    Class(Category),
}

impl FromStr for AnswerSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "semantic" {
            return Ok(AnswerSource::Semantic);
        }
        if let Some(id) = s.strip_prefix("retrieval:") {
            return Ok(AnswerSource::Retrieval(RetrievalId::from(id)));
        }
        if let Some(c) = s.strip_prefix("class:") {
            return Ok(AnswerSource::Class(c.parse()?));
        }
        Err(Error::InvalidArgument(format!(
            "unknown source `{s}` (retrieval:<id>, semantic, class:<category>)"
        )))
    }
}

impl TryFrom<String> for AnswerSource {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AnswerSource> for String {
    fn from(s: AnswerSource) -> String {
        s.to_string()
    }
}

impl fmt::Display for AnswerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerSource::Retrieval(id) => write!(f, "retrieval:{id}"),
            AnswerSource::Semantic => f.write_str("semantic"),
            AnswerSource::Class(c) => write!(f, "class:{}", c.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub query: String,
    pub source: AnswerSource,
    /// Paper or library id.
    pub scope: String,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub paragraph_id: ParagraphId,
    pub polarity: Polarity,
}

fn excerpt(text: &str) -> String {
    let mut out: String = text.chars().take(EXCERPT_CHARS).collect();
    if text.chars().count() > EXCERPT_CHARS {
        out.push('…');
    }
    out
}

fn paginate<T>(items: impl Iterator<Item = T>, page: Page) -> Vec<T> {
    items.skip(page.offset).take(page.limit).collect()
}

pub struct Workbench {
    workspace: Workspace,
    embedder: Box<dyn EmbeddingProvider<f64>>,
    llm: Box<dyn LlmProvider>,
}

impl fmt::Debug for Workbench {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Workbench")
            .field("workspace", &self.workspace)
            .field("embedder", &self.embedder.provenance())
            .field("llm", &self.llm.provider_id())
            .finish()
    }
}

impl Workbench {
    pub fn new(
        workspace: Workspace,
        embedder: Box<dyn EmbeddingProvider<f64>>,
        llm: Box<dyn LlmProvider>,
    ) -> Self {
        Self {
            workspace,
            embedder,
            llm,
        }
    }

    pub fn open(config: &Config) -> Result<Self> {
        Ok(Self::new(
            Workspace::open(&config.workspace)?,
            config.build_embedder()?,
            config.build_llm()?,
        ))
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn snapshot(&self) -> Snapshot {
        self.workspace.snapshot()
    }

    pub fn provenance(&self) -> Provenance {
        self.embedder.provenance()
    }

    pub fn llm(&self) -> &dyn LlmProvider {
        self.llm.as_ref()
    }

    /// Embeds through the workspace cache and persists any new entries.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>> {
        let cache = self.workspace.embedding_cache(&self.embedder.provenance())?;
        let out = embed_cached(self.embedder.as_ref(), &cache, texts);
        self.workspace.save_cache()?;
        out
    }

    // ---- libraries and papers

    pub fn create_library(&self, name: &str) -> Result<Library> {
        self.workspace
            .mutate(|s| s.corpus.create_library(name).cloned())
    }

    pub fn list_libraries(&self, page: Page) -> Vec<LibrarySummary> {
        let snap = self.snapshot();
        paginate(
            snap.corpus.libraries().map(|l| LibrarySummary {
                id: l.id.clone(),
                name: l.name.clone(),
                created_at: l.created_at,
                paper_count: l.paper_ids.len(),
            }),
            page,
        )
    }

    pub fn list_papers(&self, library: &LibraryId, page: Page) -> Result<Vec<PaperSummary>> {
        let snap = self.snapshot();
        let lib = snap.corpus.library(library)?;
        let mut out = Vec::new();
        for id in lib.paper_ids.iter().skip(page.offset).take(page.limit) {
            let p = snap.corpus.paper(id)?;
            out.push(PaperSummary {
                id: p.id.clone(),
                title: p.metadata.title.clone(),
                paragraph_count: p.paragraph_count(),
                needs_review: p.needs_review,
            });
        }
        Ok(out)
    }

    pub fn ingest(&self, library: &LibraryId, upload: Upload) -> Result<IngestResponse> {
        let outcome = self.workspace.mutate(|s| match upload {
            Upload::Tei {
                content,
                original_uri,
            } => s.corpus.ingest_tei(
                library,
                content.as_bytes(),
                original_uri,
                IngestOptions::default(),
            ),
            Upload::Text {
                title,
                content,
                original_uri,
            } => s
                .corpus
                .ingest_plaintext(library, &title, &content, original_uri),
        })?;
        Ok(IngestResponse {
            created: outcome.created,
            paper: self.get_paper(&outcome.paper_id)?,
        })
    }

    pub fn get_paper(&self, id: &PaperId) -> Result<Paper> {
        self.snapshot().corpus.paper(id).cloned()
    }

    pub fn get_paragraph(&self, id: &ParagraphId) -> Result<Paragraph> {
        self.snapshot().corpus.paragraph(id).cloned()
    }

    /// Replaces a paragraph's text and moves every label and retrieval
    /// reference to the new paragraph id.
    pub fn correct_paragraph(&self, id: &ParagraphId, text: &str) -> Result<Correction> {
        self.workspace.mutate(|s| {
            let fix = s.corpus.correct_paragraph(id, text)?;
            if fix.changed() {
                s.labels.migrate(&fix.old_id, &fix.paragraph.id);
                for spec in s.retrievals.values_mut() {
                    spec.migrate_paragraph(&fix.old_id, &fix.paragraph.id);
                }
            }
            Ok(fix)
        })
    }

    // ---- search and ranking

    pub fn resolve_scope(&self, id: &str) -> Result<Scope> {
        self.snapshot().corpus.resolve_scope(id)
    }

    pub fn search(
        &self,
        scope: &Scope,
        mode: SearchMode,
        query: &str,
        k: usize,
        case_sensitive: bool,
    ) -> Result<SearchResponse> {
        match mode {
            SearchMode::Text => Ok(SearchResponse::Text(self.snapshot().corpus.text_search(
                scope,
                query,
                case_sensitive,
            )?)),
            SearchMode::Semantic => Ok(SearchResponse::Semantic(self.semantic_search(query, scope, k)?)),
        }
    }

    pub fn semantic_search(&self, query: &str, scope: &Scope, k: usize) -> Result<Vec<Hit>> {
        let spec = RetrievalSpec::for_query(query);
        self.rank_spec(&self.snapshot(), &spec, scope, k)
    }

    /// Resolves the four ensembles of `spec` to embeddings and combines them.
    pub fn retrieval_embedding(
        &self,
        snap: &Snapshot,
        spec: &RetrievalSpec<f64>,
    ) -> Result<EmbeddingVector<f64>> {
        let texts = |ids: &[ParagraphId]| -> Result<Vec<String>> {
            ids.iter()
                .map(|id| snap.corpus.paragraph(id).map(|p| p.text.clone()))
                .collect()
        };
        let pp = self.embed(&texts(&spec.positive_paragraph_ids)?)?;
        let np = self.embed(&texts(&spec.negative_paragraph_ids)?)?;
        let pq = self.embed(&spec.positive_queries)?;
        let nq = self.embed(&spec.negative_queries)?;
        retrieval_embedding(
            &Ensembles {
                positive_paragraphs: &pp,
                positive_queries: &pq,
                negative_paragraphs: &np,
                negative_queries: &nq,
            },
            &spec.weights,
        )
    }

    fn rank_spec(
        &self,
        snap: &Snapshot,
        spec: &RetrievalSpec<f64>,
        scope: &Scope,
        k: usize,
    ) -> Result<Vec<Hit>> {
        let r = self.retrieval_embedding(snap, spec)?;
        let paragraphs = snap.corpus.scope_paragraphs(scope)?;
        let texts: Vec<String> = paragraphs.iter().map(|p| p.text.clone()).collect();
        let embeddings = self.embed(&texts)?;
        let candidates: Vec<Candidate<'_, f64>> = paragraphs
            .iter()
            .zip(&embeddings)
            .map(|(p, e)| Candidate {
                paragraph_id: &p.id,
                embedding: e,
            })
            .collect();
        let hits = rank_candidates(&r, &candidates, k, spec.min_score)?;
        hits.into_iter()
            .map(|h: RankedHit<f64>| {
                let p = snap.corpus.paragraph(&h.paragraph_id)?;
                Ok(Hit {
                    rank: h.rank,
                    score: h.score,
                    display_score: h.display_score,
                    paragraph_id: h.paragraph_id,
                    paper_id: p.paper_id.clone(),
                    section_index: p.section_index,
                    para_index: p.para_index,
                    excerpt: excerpt(&p.text),
                    text: p.text.clone(),
                })
            })
            .collect()
    }

    // ---- retrievals

    pub fn create_retrieval(&self, draft: RetrievalDraft<f64>) -> Result<RetrievalSpec<f64>> {
        let spec = RetrievalSpec::from_draft(draft)?;
        self.workspace.mutate(|s| {
            s.retrievals.insert(spec.id.clone(), spec.clone());
            Ok(spec)
        })
    }

    pub fn get_retrieval(&self, id: &RetrievalId) -> Result<RetrievalSpec<f64>> {
        self.snapshot().retrieval(id).cloned()
    }

    pub fn list_retrievals(&self, page: Page) -> Vec<RetrievalSpec<f64>> {
        paginate(self.snapshot().retrievals.values().cloned(), page)
    }

    pub fn label_paragraph(
        &self,
        id: &RetrievalId,
        paragraph_id: &ParagraphId,
        polarity: Polarity,
    ) -> Result<RetrievalSpec<f64>> {
        self.workspace.mutate(|s| {
            s.corpus.paragraph(paragraph_id)?;
            let spec = s
                .retrievals
                .get_mut(id)
                .ok_or_else(|| Error::not_found("retrieval", id.as_str()))?;
            spec.label(paragraph_id, polarity);
            Ok(spec.clone())
        })
    }

    pub fn set_weights(&self, id: &RetrievalId, weights: Weights<f64>) -> Result<RetrievalSpec<f64>> {
        weights.validate()?;
        self.workspace.mutate(|s| {
            let spec = s
                .retrievals
                .get_mut(id)
                .ok_or_else(|| Error::not_found("retrieval", id.as_str()))?;
            spec.weights = weights;
            Ok(spec.clone())
        })
    }

    pub fn add_query(&self, id: &RetrievalId, query: &str, positive: bool) -> Result<RetrievalSpec<f64>> {
        self.workspace.mutate(|s| {
            let spec = s
                .retrievals
                .get_mut(id)
                .ok_or_else(|| Error::not_found("retrieval", id.as_str()))?;
            spec.add_query(query, positive)?;
            Ok(spec.clone())
        })
    }

    pub fn rank(&self, id: &RetrievalId, scope: &Scope, k: usize) -> Result<Vec<Hit>> {
        let snap = self.snapshot();
        let spec = snap.retrieval(id)?.clone();
        self.rank_spec(&snap, &spec, scope, k)
    }

    /// Adds the four shipped category retrievals. A retrieval with the same
    /// name is left alone, so repeated imports change nothing.
    pub fn import_defaults(&self) -> Result<Vec<RetrievalSpec<f64>>> {
        self.workspace.mutate(|s| {
            let mut out = Vec::new();
            for draft in default_drafts::<f64>() {
                let existing = s.retrievals.values().find(|r| r.name == draft.name).cloned();
                let spec = match existing {
                    Some(spec) => spec,
                    None => {
                        let spec = RetrievalSpec::from_draft(draft)?;
                        s.retrievals.insert(spec.id.clone(), spec.clone());
                        spec
                    }
                };
                out.push(spec);
            }
            Ok(out)
        })
    }

    // ---- labels and datasets

    pub fn set_label(&self, record: LabelRecord) -> Result<LabelRecord> {
        self.workspace.mutate(|s| {
            s.corpus.paragraph(&record.paragraph_id)?;
            s.labels.set(record.clone());
            Ok(record)
        })
    }

    pub fn labels(&self) -> Vec<LabelRecord> {
        self.snapshot().labels.records().cloned().collect()
    }

    /// Label vector per paragraph: the union of explicit records and the
    /// categories of retrievals listing it as a positive.
    fn labeled_rows(&self, snap: &Snapshot, library: &LibraryId) -> Result<Vec<(Paragraph, [bool; NUM_CATEGORIES], bool)>> {
        let paragraphs = snap.corpus.scope_paragraphs(&Scope::Library(library.clone()))?;
        let mut out = Vec::new();
        for p in paragraphs {
            let mut labels = [false; NUM_CATEGORIES];
            let mut irrelevant = false;
            if let Some(r) = snap.labels.get(&p.id) {
                labels = r.label_vector();
                irrelevant = r.irrelevant;
            }
            for spec in snap.retrievals.values() {
                if let Some(c) = spec.category {
                    if spec.positive_paragraph_ids.contains(&p.id) {
                        labels[c.index()] = true;
                    }
                }
            }
            let labeled = labels.iter().any(|l| *l);
            if labeled || irrelevant {
                out.push((p.clone(), labels, irrelevant && !labeled));
            }
        }
        Ok(out)
    }

    pub fn build_dataset(
        &self,
        library: &LibraryId,
        include_irrelevant: bool,
        seed: u64,
        test_fraction: f64,
    ) -> Result<Dataset<f64>> {
        let snap = self.snapshot();
        let rows = self.labeled_rows(&snap, library)?;
        let texts: Vec<String> = rows.iter().map(|(p, _, _)| p.text.clone()).collect();
        let embeddings = self.embed(&texts)?;
        let rows = rows
            .into_iter()
            .zip(embeddings)
            .map(|((p, labels, irrelevant), embedding)| LabeledRow {
                paragraph_id: p.id,
                text: p.text,
                labels,
                irrelevant,
                embedding,
            })
            .collect();
        build_dataset(rows, include_irrelevant, seed, test_fraction)
    }

    pub fn export_dataset(&self, req: &ExportRequest) -> Result<ExportResponse> {
        let ds = self.build_dataset(&req.library, req.include_irrelevant, req.seed, req.test_fraction)?;
        Ok(ExportResponse {
            provenance: ds.provenance.clone(),
            seed: ds.seed,
            test_fraction: ds.test_fraction,
            train: ds.train_len(),
            test: ds.test_len(),
            records: ds.to_lines(req.with_embeddings),
        })
    }

    /// Rebuilds a dataset from exported lines, embedding any line that does
    /// not carry its vector.
    pub fn dataset_from_lines(
        &self,
        lines: Vec<DatasetLine>,
        seed: u64,
        test_fraction: f64,
    ) -> Result<Dataset<f64>> {
        let prov = self.provenance();
        let missing: Vec<String> = lines
            .iter()
            .filter(|l| l.embedding.is_none())
            .map(|l| l.text.clone())
            .collect();
        let mut fresh = self.embed(&missing)?.into_iter();
        let mut embeddings = Vec::with_capacity(lines.len());
        for line in &lines {
            let e = match &line.embedding {
                Some(values) => {
                    if values.len() != prov.dim {
                        return Err(Error::DimensionMismatch {
                            expected: prov.dim,
                            got: values.len(),
                        });
                    }
                    EmbeddingVector::new(values.clone(), prov.provider_id.clone(), prov.model_id.clone())?
                }
                None => fresh.next().expect("one fresh embedding per missing line"),
            };
            embeddings.push(e);
        }
        Dataset::from_lines(lines, embeddings, seed, test_fraction)
    }

    // ---- classifier

    pub fn train(&self, req: TrainRequest) -> Result<TrainResponse> {
        let dataset = match (req.dataset, &req.library) {
            (Some(lines), _) => self.dataset_from_lines(lines, req.seed, req.test_fraction)?,
            (None, Some(lib)) => {
                self.build_dataset(lib, req.include_irrelevant, req.seed, req.test_fraction)?
            }
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "train needs a library or dataset lines".into(),
                ))
            }
        };
        let model = LinearLabelModel::train(&dataset, req.config)?;
        let report = if dataset.test_len() > 0 {
            Some(evaluate(&model, &dataset, req.threshold)?)
        } else {
            None
        };
        let response = TrainResponse {
            model_id: model.id.clone(),
            train_records: dataset.train_len(),
            test_records: dataset.test_len(),
            degenerate_heads: Category::ALL
                .into_iter()
                .filter(|c| model.heads[c.index()].degenerate)
                .collect(),
            final_loss: model.loss_history.last().copied().unwrap_or(f64::NAN),
            report: report.clone(),
        };
        let stored = StoredModel {
            model,
            report,
            created_at: Utc::now(),
            train_records: response.train_records,
            test_records: response.test_records,
        };
        self.workspace.mutate(|s| {
            let id = stored.model.id.clone();
            s.models.insert(id.clone(), stored);
            s.active_model = Some(id);
            Ok(())
        })?;
        Ok(response)
    }

    pub fn model(&self, id: Option<&ModelId>) -> Result<StoredModel> {
        self.snapshot().model(id).cloned()
    }

    pub fn report(&self, id: Option<&ModelId>) -> Result<ClassificationReport> {
        self.model(id)?
            .report
            .ok_or(Error::EmptySplit("the model was trained without a test split"))
    }

    pub fn predict(&self, req: &PredictRequest) -> Result<PredictResponse> {
        let stored = self.model(req.model.as_ref())?;
        let (paragraph_id, text) = match &req.input {
            PredictInput::Paragraph { paragraph_id } => (
                Some(paragraph_id.clone()),
                self.get_paragraph(paragraph_id)?.text,
            ),
            PredictInput::Text { text } => (None, text.clone()),
        };
        let e = self.embed(&[text])?.remove(0);
        let p = stored.model.predict(&e, req.threshold)?;
        Ok(PredictResponse {
            model_id: stored.model.id,
            paragraph_id,
            probabilities: p.probabilities,
            labels: p.labels,
        })
    }

    // ---- question answering

    pub fn answer(&self, req: &QueryRequest) -> Result<Answer> {
        if req.k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let snap = self.snapshot();
        let scope = snap.corpus.resolve_scope(&req.scope)?;
        let passages: Vec<(String, Option<ParagraphId>)> = match &req.source {
            AnswerSource::Retrieval(id) => {
                let spec = snap.retrieval(id)?.clone();
                self.rank_spec(&snap, &spec, &scope, req.k)?
                    .into_iter()
                    .map(|h| (h.text, Some(h.paragraph_id)))
                    .collect()
            }
            AnswerSource::Semantic => {
                let spec = RetrievalSpec::for_query(&req.query);
                self.rank_spec(&snap, &spec, &scope, req.k)?
                    .into_iter()
                    .map(|h| (h.text, Some(h.paragraph_id)))
                    .collect()
            }
            AnswerSource::Class(category) => {
                let stored = snap.model(None)?;
                let paragraphs = snap.corpus.scope_paragraphs(&scope)?;
                let texts: Vec<String> = paragraphs.iter().map(|p| p.text.clone()).collect();
                let embeddings = self.embed(&texts)?;
                let candidates: Vec<ClassifiedCandidate<'_, f64>> = paragraphs
                    .iter()
                    .zip(&embeddings)
                    .map(|(p, e)| ClassifiedCandidate {
                        paragraph_id: &p.id,
                        text: &p.text,
                        embedding: e,
                    })
                    .collect();
                classifier_passages(&candidates, *category, &stored.model, req.threshold, req.k)?
            }
        };
        query::answer(&req.query, passages, self.llm.as_ref())
    }
}
