//! Source files, equal-length token fragments, and the retrieval corpus.
//!
//! Files are processed in lexicographic path order so fragment ids are
//! reproducible across runs. Every fragment of a file has exactly
//! `fragment_length` tokens except possibly the last; the short tail is
//! kept so completion queries can target file ends.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::lex::{tokenize, LexError};
use crate::token::Token;

pub const MIN_FRAGMENT_LENGTH: usize = 8;
pub const DEFAULT_FRAGMENT_LENGTH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FileId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FragmentId(pub u32);

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "file{}", self.0)
    }
}

impl fmt::Display for FragmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frag{}", self.0)
    }
}

impl FileId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FragmentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dialect tag. Only the mini-language is supported; the tag keeps the
/// manifest format open for other lexers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "mini")]
    Mini,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Language::Mini => write!(f, "mini"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub id: FileId,
    pub path: String,
    pub language: Language,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub id: FragmentId,
    pub file: FileId,
    /// 0-based position within the file.
    pub ordinal: u32,
    pub tokens: Vec<Token>,
    /// `[start, end)` offsets into the file's token stream.
    pub token_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    EmptyCorpus,
    FragmentLengthTooSmall { got: usize },
    DuplicatePath { path: String },
    UnknownFragment { id: FragmentId },
    UnknownFile { id: FileId },
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyCorpus => write!(f, "empty corpus"),
            CorpusError::FragmentLengthTooSmall { got } => write!(
                f,
                "configuration error: fragment_length {got} is below the minimum of {MIN_FRAGMENT_LENGTH}"
            ),
            CorpusError::DuplicatePath { path } => write!(f, "duplicate file path {path:?}"),
            CorpusError::UnknownFragment { id } => write!(f, "lookup error: unknown fragment {id}"),
            CorpusError::UnknownFile { id } => write!(f, "lookup error: unknown file {id}"),
        }
    }
}

impl core::error::Error for CorpusError {}

/// Files that were rejected during ingestion, with the lexer's reason.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

/// The retrieval database: files, fragments, and successor links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    files: Vec<SourceFile>,
    fragments: Vec<Fragment>,
    /// Indexed by fragment id; `None` for the last fragment of a file.
    successors: Vec<Option<FragmentId>>,
    fragment_length: usize,
}

/// One input file for corpus construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileInput {
    pub path: String,
    pub text: String,
}

/// Builds a corpus from in-memory file contents. Unlexable or empty
/// files are skipped and reported; paths are deduplicated by error.
pub fn build_corpus(
    mut inputs: Vec<FileInput>,
    language: Language,
    fragment_length: usize,
) -> Result<(Corpus, IngestReport), CorpusError> {
    if fragment_length < MIN_FRAGMENT_LENGTH {
        return Err(CorpusError::FragmentLengthTooSmall { got: fragment_length });
    }
    inputs.sort_by(|a, b| a.path.cmp(&b.path));
    for pair in inputs.windows(2) {
        if pair[0].path == pair[1].path {
            return Err(CorpusError::DuplicatePath { path: pair[0].path.clone() });
        }
    }

    let mut report = IngestReport::default();
    let mut files = Vec::new();
    let mut fragments: Vec<Fragment> = Vec::new();
    let mut successors: Vec<Option<FragmentId>> = Vec::new();

    for input in inputs {
        let tokens = match tokenize(&input.text) {
            Ok(tokens) => tokens,
            Err(err) => {
                report.skipped.push(SkippedFile { path: input.path, reason: describe_lex(&err) });
                continue;
            }
        };
        if tokens.is_empty() {
            report
                .skipped
                .push(SkippedFile { path: input.path, reason: "no tokens after filtering".to_string() });
            continue;
        }
        let file_id = FileId(files.len() as u32);
        files.push(SourceFile {
            id: file_id,
            path: input.path,
            language,
            text: input.text,
        });
        let first_new = fragments.len();
        for (ordinal, chunk) in tokens.chunks(fragment_length).enumerate() {
            let start = ordinal * fragment_length;
            let id = FragmentId(fragments.len() as u32);
            fragments.push(Fragment {
                id,
                file: file_id,
                ordinal: ordinal as u32,
                tokens: chunk.to_vec(),
                token_span: (start, start + chunk.len()),
            });
            successors.push(Some(FragmentId(id.0 + 1)));
        }
        // The file's last fragment has no successor.
        if fragments.len() > first_new {
            successors[fragments.len() - 1] = None;
        }
    }

    if files.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok((Corpus { files, fragments, successors, fragment_length }, report))
}

fn describe_lex(err: &LexError) -> String {
    format!("{err}")
}

impl Corpus {
    /// Rebuilds a corpus from previously persisted parts, revalidating
    /// the fragment invariants against each file's token stream.
    pub fn from_parts(
        files: Vec<SourceFile>,
        fragment_length: usize,
    ) -> Result<(Corpus, IngestReport), CorpusError> {
        let inputs = files
            .iter()
            .map(|f| FileInput { path: f.path.clone(), text: f.text.clone() })
            .collect();
        let language = files.first().map(|f| f.language).unwrap_or(Language::Mini);
        build_corpus(inputs, language, fragment_length)
    }

    pub fn files(&self) -> &[SourceFile] {
        &self.files
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment_length(&self) -> usize {
        self.fragment_length
    }

    pub fn file(&self, id: FileId) -> Result<&SourceFile, CorpusError> {
        self.files.get(id.index()).ok_or(CorpusError::UnknownFile { id })
    }

    pub fn file_by_path(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn fragment(&self, id: FragmentId) -> Result<&Fragment, CorpusError> {
        self.fragments.get(id.index()).ok_or(CorpusError::UnknownFragment { id })
    }

    /// The fragment following `id` in the same file, or `None` when
    /// `id` is the file's last fragment.
    pub fn successor(&self, id: FragmentId) -> Result<Option<&Fragment>, CorpusError> {
        if id.index() >= self.fragments.len() {
            return Err(CorpusError::UnknownFragment { id });
        }
        Ok(self.successors[id.index()].map(|next| &self.fragments[next.index()]))
    }

    pub fn fragments_of_file(&self, file: FileId) -> impl Iterator<Item = &Fragment> {
        self.fragments.iter().filter(move |f| f.file == file)
    }

    /// The file's full token stream (fragments are contiguous slices of it).
    pub fn file_tokens(&self, file: FileId) -> Result<Vec<Token>, CorpusError> {
        self.file(file)?;
        let mut tokens = Vec::new();
        for fragment in self.fragments_of_file(file) {
            tokens.extend_from_slice(&fragment.tokens);
        }
        Ok(tokens)
    }
}
