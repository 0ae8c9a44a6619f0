//! Libraries of parsed papers and their paragraphs.

mod ids;
mod search;
pub(crate) mod tei;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

pub use ids::{LibraryId, ModelId, PaperId, ParagraphId, RetrievalId};
pub(crate) use ids::random_hex_id;
pub use search::{SearchHit, Span};

use crate::error::{Error, Result};
use crate::text::{normalize_whitespace, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Library {
    pub id: LibraryId,
    pub name: String,
    pub created_at: DateTime<Utc>,
    pub paper_ids: Vec<PaperId>,
}

impl Library {
    pub fn new(name: &str) -> Result<Self> {
        Self::with_id(LibraryId::new(random_hex_id()), name)
    }

    pub fn with_id(id: LibraryId, name: &str) -> Result<Self> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::InvalidArgument("library name must be non-empty".into()));
        }
        Ok(Self {
            id,
            name: name.to_owned(),
            created_at: Utc::now(),
            paper_ids: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PaperMetadata {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub authors: Vec<String>,
    pub date: Option<String>,
    pub doi: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Tei,
    Plaintext,
}

/// Figure, table, formula or bibliography entry kept next to the paper but
/// never part of the retrieval pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SideKind {
    Figure,
    Table,
    Formula,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideRecord {
    pub kind: SideKind,
    pub label: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paragraph {
    pub id: ParagraphId,
    pub paper_id: PaperId,
    pub section_index: usize,
    pub para_index: usize,
    pub text: String,
    pub edited: bool,
    /// Same normalized text as an earlier paragraph of the paper.
    #[serde(default)]
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    pub library_id: LibraryId,
    pub metadata: PaperMetadata,
    pub sections: Vec<Section>,
    pub source_format: SourceFormat,
    pub needs_review: bool,
    pub original_uri: Option<String>,
    /// SHA-256 of the uploaded source bytes.
    pub content_hash: String,
    #[serde(default)]
    pub side_records: Vec<SideRecord>,
}

impl Paper {
    pub fn paragraphs(&self) -> impl Iterator<Item = &Paragraph> {
        self.sections.iter().flat_map(|s| s.paragraphs.iter())
    }

    pub fn paragraph_count(&self) -> usize {
        self.sections.iter().map(|s| s.paragraphs.len()).sum()
    }

    fn refresh_duplicates(&mut self) {
        let mut seen = HashSet::new();
        for p in self.sections.iter_mut().flat_map(|s| s.paragraphs.iter_mut()) {
            p.duplicate = !seen.insert(p.text.clone());
        }
    }
}

pub(crate) fn paragraph_id(
    paper_id: &PaperId,
    section_index: usize,
    para_index: usize,
    text: &str,
) -> ParagraphId {
    let salted = format!("{paper_id}\u{1f}{section_index}\u{1f}{para_index}\u{1f}{text}");
    ParagraphId::new(&sha256_hex(salted.as_bytes())[..32])
}

fn paper_id(library_id: &LibraryId, source: &[u8]) -> PaperId {
    let mut salted = library_id.as_str().as_bytes().to_vec();
    salted.push(0x1f);
    salted.extend_from_slice(source);
    PaperId::new(&sha256_hex(&salted)[..32])
}

/// Ingestion knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Prepend the TEI abstract as a section headed "Abstract".
    pub abstract_as_section: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            abstract_as_section: true,
        }
    }
}

pub const ABSTRACT_HEADING: &str = "Abstract";

/// Where a paragraph listing, search or ranking applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "id")]
pub enum Scope {
    Library(LibraryId),
    Paper(PaperId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub paper_id: PaperId,
    /// False when the same bytes were already present in the library.
    pub created: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correction {
    pub old_id: ParagraphId,
    pub paragraph: Paragraph,
}

impl Correction {
    pub fn changed(&self) -> bool {
        self.old_id != self.paragraph.id
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Location {
    section: usize,
    para: usize,
}

/// In-memory view of every library and paper. Cloning is cheap enough for
/// snapshotting at the corpus sizes this tool targets.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    libraries: BTreeMap<LibraryId, Library>,
    papers: BTreeMap<PaperId, Paper>,
    index: HashMap<ParagraphId, (PaperId, Location)>,
}

impl Corpus {
    pub fn from_parts(libraries: Vec<Library>, papers: Vec<Paper>) -> Self {
        let mut corpus = Corpus {
            libraries: libraries.into_iter().map(|l| (l.id.clone(), l)).collect(),
            papers: BTreeMap::new(),
            index: HashMap::new(),
        };
        for paper in papers {
            corpus.insert_paper(paper);
        }
        corpus
    }

    fn insert_paper(&mut self, paper: Paper) {
        for (si, s) in paper.sections.iter().enumerate() {
            for (pi, p) in s.paragraphs.iter().enumerate() {
                self.index.insert(
                    p.id.clone(),
                    (paper.id.clone(), Location { section: si, para: pi }),
                );
            }
        }
        self.papers.insert(paper.id.clone(), paper);
    }

    pub fn libraries(&self) -> impl Iterator<Item = &Library> {
        self.libraries.values()
    }

    pub fn library(&self, id: &LibraryId) -> Result<&Library> {
        self.libraries
            .get(id)
            .ok_or_else(|| Error::not_found("library", id.as_str()))
    }

    pub fn papers(&self) -> impl Iterator<Item = &Paper> {
        self.papers.values()
    }

    pub fn paper(&self, id: &PaperId) -> Result<&Paper> {
        self.papers
            .get(id)
            .ok_or_else(|| Error::not_found("paper", id.as_str()))
    }

    pub fn paragraph(&self, id: &ParagraphId) -> Result<&Paragraph> {
        let (paper_id, loc) = self
            .index
            .get(id)
            .ok_or_else(|| Error::not_found("paragraph", id.as_str()))?;
        Ok(&self.papers[paper_id].sections[loc.section].paragraphs[loc.para])
    }

    pub fn contains_paragraph(&self, id: &ParagraphId) -> bool {
        self.index.contains_key(id)
    }

    pub fn create_library(&mut self, name: &str) -> Result<&Library> {
        let library = Library::new(name)?;
        let id = library.id.clone();
        self.libraries.insert(id.clone(), library);
        Ok(&self.libraries[&id])
    }

    pub fn insert_library(&mut self, library: Library) {
        self.libraries.insert(library.id.clone(), library);
    }

    /// Resolves a bare id to a paper scope first, then a library scope.
    pub fn resolve_scope(&self, id: &str) -> Result<Scope> {
        if self.papers.contains_key(&PaperId::from(id)) {
            Ok(Scope::Paper(PaperId::from(id)))
        } else if self.libraries.contains_key(&LibraryId::from(id)) {
            Ok(Scope::Library(LibraryId::from(id)))
        } else {
            Err(Error::not_found("paper or library", id))
        }
    }

    /// Paragraphs of a paper in document order.
    pub fn get_paragraphs(&self, paper_id: &PaperId) -> Result<Vec<&Paragraph>> {
        Ok(self.paper(paper_id)?.paragraphs().collect())
    }

    /// Paragraphs in scope, paper by paper in library order.
    pub fn scope_paragraphs(&self, scope: &Scope) -> Result<Vec<&Paragraph>> {
        match scope {
            Scope::Paper(id) => self.get_paragraphs(id),
            Scope::Library(id) => {
                let library = self.library(id)?;
                let mut out = Vec::new();
                for pid in &library.paper_ids {
                    out.extend(self.paper(pid)?.paragraphs());
                }
                Ok(out)
            }
        }
    }

    fn add_paper(
        &mut self,
        library_id: &LibraryId,
        source: &[u8],
        build: impl FnOnce(PaperId) -> Result<Paper>,
    ) -> Result<IngestOutcome> {
        self.library(library_id)?;
        let id = paper_id(library_id, source);
        if self.papers.contains_key(&id) {
            return Ok(IngestOutcome {
                paper_id: id,
                created: false,
            });
        }
        let mut paper = build(id.clone())?;
        paper.refresh_duplicates();
        self.insert_paper(paper);
        self.libraries
            .get_mut(library_id)
            .expect("checked above")
            .paper_ids
            .push(id.clone());
        Ok(IngestOutcome {
            paper_id: id,
            created: true,
        })
    }

    pub fn ingest_tei(
        &mut self,
        library_id: &LibraryId,
        tei: &[u8],
        original_uri: Option<String>,
        options: IngestOptions,
    ) -> Result<IngestOutcome> {
        let parsed = tei::parse_tei(tei)?;
        let content_hash = sha256_hex(tei);
        self.add_paper(library_id, tei, move |id| {
            let mut headings_and_texts = Vec::new();
            if options.abstract_as_section && !parsed.abstract_paragraphs.is_empty() {
                headings_and_texts.push((ABSTRACT_HEADING.to_owned(), parsed.abstract_paragraphs));
            }
            headings_and_texts.extend(parsed.sections.into_iter().map(|s| (s.heading, s.paragraphs)));
            let needs_review = parsed.metadata.title.is_empty() || parsed.metadata.authors.is_empty();
            Ok(Paper {
                sections: build_sections(&id, headings_and_texts),
                id,
                library_id: library_id.clone(),
                metadata: parsed.metadata,
                source_format: SourceFormat::Tei,
                needs_review,
                original_uri,
                content_hash,
                side_records: parsed.side_records,
            })
        })
    }

    pub fn ingest_plaintext(
        &mut self,
        library_id: &LibraryId,
        title: &str,
        text: &str,
        original_uri: Option<String>,
    ) -> Result<IngestOutcome> {
        let paragraphs = split_plaintext(text);
        if paragraphs.is_empty() {
            return Err(Error::EmptyText);
        }
        let title = normalize_whitespace(title);
        let mut source = title.as_bytes().to_vec();
        source.push(0);
        source.extend_from_slice(text.as_bytes());
        let content_hash = sha256_hex(&source);
        self.add_paper(library_id, &source, move |id| {
            Ok(Paper {
                sections: build_sections(&id, vec![(String::new(), paragraphs)]),
                id,
                library_id: library_id.clone(),
                needs_review: title.is_empty(),
                metadata: PaperMetadata {
                    title,
                    ..PaperMetadata::default()
                },
                source_format: SourceFormat::Plaintext,
                original_uri,
                content_hash,
                side_records: Vec::new(),
            })
        })
    }

    /// Replaces a paragraph's text. The paragraph keeps its position and gets
    /// a new content-addressed id; identical text is a no-op.
    pub fn correct_paragraph(&mut self, id: &ParagraphId, new_text: &str) -> Result<Correction> {
        let new_text = normalize_whitespace(new_text);
        if new_text.is_empty() {
            return Err(Error::EmptyText);
        }
        let (paper_id, loc) = self
            .index
            .get(id)
            .cloned()
            .ok_or_else(|| Error::not_found("paragraph", id.as_str()))?;
        let paper = self.papers.get_mut(&paper_id).expect("index is consistent");
        let para = &mut paper.sections[loc.section].paragraphs[loc.para];
        if para.text == new_text {
            return Ok(Correction {
                old_id: id.clone(),
                paragraph: para.clone(),
            });
        }
        para.text = new_text;
        para.edited = true;
        para.id = paragraph_id(&paper_id, loc.section, loc.para, &para.text);
        let paragraph = para.clone();
        paper.refresh_duplicates();
        self.index.remove(id);
        self.index.insert(paragraph.id.clone(), (paper_id, loc));
        let paragraph = self.paragraph(&paragraph.id)?.clone();
        Ok(Correction {
            old_id: id.clone(),
            paragraph,
        })
    }

    pub fn text_search(
        &self,
        scope: &Scope,
        needle: &str,
        case_sensitive: bool,
    ) -> Result<Vec<SearchHit>> {
        if needle.is_empty() {
            return Err(Error::InvalidArgument("search needle must be non-empty".into()));
        }
        let paragraphs = self.scope_paragraphs(scope)?;
        search::find_all(paragraphs, needle, case_sensitive)
    }
}

fn build_sections(paper_id: &PaperId, parts: Vec<(String, Vec<String>)>) -> Vec<Section> {
    parts
        .into_iter()
        .enumerate()
        .map(|(si, (heading, texts))| Section {
            heading,
            paragraphs: texts
                .into_iter()
                .enumerate()
                .map(|(pi, text)| Paragraph {
                    id: paragraph_id(paper_id, si, pi, &text),
                    paper_id: paper_id.clone(),
                    section_index: si,
                    para_index: pi,
                    text,
                    edited: false,
                    duplicate: false,
                })
                .collect(),
        })
        .collect()
}

/// Splits on blank lines (lines holding only whitespace), CRLF or LF.
pub fn split_plaintext(text: &str) -> Vec<String> {
    static BLANK: OnceLock<Regex> = OnceLock::new();
    let re = BLANK.get_or_init(|| Regex::new(r"\n[ \t]*\n").unwrap());
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    re.split(&text)
        .map(normalize_whitespace)
        .filter(|p| !p.is_empty())
        .collect()
}
