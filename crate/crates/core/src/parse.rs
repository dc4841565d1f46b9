//! Syntax validation with tree-sitter grammars.
//!
//! Code is valid for a language when its concrete syntax tree has no ERROR
//! and no MISSING nodes. Nothing is compiled or type checked.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::{Language, Parser};

use crate::corpus::LanguageId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub language: LanguageId,
    pub ok: bool,
    pub error_count: usize,
    /// 1-based (line, column) of the first error or missing node; the column
    /// counts bytes.
    pub first_error: Option<(usize, usize)>,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("no grammar registered for `{0}`")]
    UnsupportedLanguage(LanguageId),
    #[error("grammar for `{language}` is unusable: {reason}")]
    IncompatibleGrammar { language: String, reason: String },
    #[error("cannot load grammar for `{language}` from {path}: {reason}")]
    GrammarLoad {
        language: String,
        path: PathBuf,
        reason: String,
    },
    #[error("unknown builtin grammar `{0}`")]
    UnknownBuiltin(String),
    #[error("parser gave up on the input")]
    ParserFailed,
}

/// Grammars compiled into the binary, by canonical language name.
pub fn builtin_grammar(name: &str) -> Option<Language> {
    let lang: Language = match name {
        "c" => tree_sitter_c::LANGUAGE.into(),
        "cpp" => tree_sitter_cpp::LANGUAGE.into(),
        "csharp" => tree_sitter_c_sharp::LANGUAGE.into(),
        "dart" => tree_sitter_dart::LANGUAGE.into(),
        "go" => tree_sitter_go::LANGUAGE.into(),
        "haskell" => tree_sitter_haskell::LANGUAGE.into(),
        "java" => tree_sitter_java::LANGUAGE.into(),
        "javascript" => tree_sitter_javascript::LANGUAGE.into(),
        "julia" => tree_sitter_julia::LANGUAGE.into(),
        "kotlin" => tree_sitter_kotlin_ng::LANGUAGE.into(),
        "lua" => tree_sitter_lua::LANGUAGE.into(),
        "php" => tree_sitter_php::LANGUAGE_PHP.into(),
        "python" => tree_sitter_python::LANGUAGE.into(),
        "rust" => tree_sitter_rust::LANGUAGE.into(),
        "scala" => tree_sitter_scala::LANGUAGE.into(),
        "typescript" => tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into(),
        _ => return None,
    };
    Some(lang)
}

pub const BUILTIN_GRAMMARS: &[&str] = &[
    "c",
    "cpp",
    "csharp",
    "dart",
    "go",
    "haskell",
    "java",
    "javascript",
    "julia",
    "kotlin",
    "lua",
    "php",
    "python",
    "rust",
    "scala",
    "typescript",
];

/// Maps canonical language names to grammars. Each validation call builds its
/// own parser, so a registry can be shared freely across threads.
#[derive(Clone, Default)]
pub struct GrammarRegistry {
    grammars: BTreeMap<String, Language>,
    // keeps shared libraries mapped for as long as their grammars are reachable
    libraries: Vec<Arc<libloading::Library>>,
}

impl std::fmt::Debug for GrammarRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrammarRegistry")
            .field("languages", &self.grammars.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl GrammarRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Every grammar compiled into the binary.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for name in BUILTIN_GRAMMARS {
            reg.grammars
                .insert(name.to_string(), builtin_grammar(name).expect("listed builtin"));
        }
        reg
    }

    /// Builds a registry from `language → location` entries. A location is
    /// either `builtin:<name>` or the path of a shared library exporting
    /// `tree_sitter_<language>`; relative paths resolve against `base_dir`.
    pub fn from_locations(
        locations: &BTreeMap<String, String>,
        base_dir: &Path,
    ) -> Result<Self, ParseError> {
        let mut reg = Self::empty();
        for (language, location) in locations {
            let language = language.trim().to_lowercase();
            if let Some(name) = location.strip_prefix("builtin:") {
                let grammar =
                    builtin_grammar(name.trim()).ok_or_else(|| ParseError::UnknownBuiltin(name.to_string()))?;
                reg.register(&language, grammar)?;
            } else {
                let path = base_dir.join(location);
                reg.load_library(&language, &path)?;
            }
        }
        Ok(reg)
    }

    pub fn register(&mut self, language: &str, grammar: Language) -> Result<(), ParseError> {
        Parser::new()
            .set_language(&grammar)
            .map_err(|e| ParseError::IncompatibleGrammar {
                language: language.to_string(),
                reason: e.to_string(),
            })?;
        self.grammars.insert(language.to_string(), grammar);
        Ok(())
    }

    fn load_library(&mut self, language: &str, path: &Path) -> Result<(), ParseError> {
        let load_err = |reason: String| ParseError::GrammarLoad {
            language: language.to_string(),
            path: path.to_path_buf(),
            reason,
        };
        let symbol = format!("tree_sitter_{}", language.replace('-', "_"));
        // SAFETY: loading a grammar library runs no initializers beyond what any
        // tree-sitter parser library has; the symbol has the standard grammar
        // signature and the library outlives the Language through `libraries`.
        let grammar = unsafe {
            let lib = libloading::Library::new(path).map_err(|e| load_err(e.to_string()))?;
            let func: libloading::Symbol<unsafe extern "C" fn() -> *const ()> =
                lib.get(symbol.as_bytes()).map_err(|e| load_err(e.to_string()))?;
            let language_fn = tree_sitter_language::LanguageFn::from_raw(*func);
            let grammar: Language = language_fn.into();
            self.libraries.push(Arc::new(lib));
            grammar
        };
        self.register(language, grammar)
    }

    pub fn supports(&self, language: &LanguageId) -> bool {
        self.grammars.contains_key(language.as_str())
    }

    /// Languages with a registered grammar, sorted.
    pub fn supported_languages(&self) -> Vec<LanguageId> {
        self.grammars.keys().map(|k| LanguageId::from_canonical(k)).collect()
    }

    pub fn validate_syntax(&self, code: &str, language: &LanguageId) -> Result<ParseOutcome, ParseError> {
        let grammar = self
            .grammars
            .get(language.as_str())
            .ok_or_else(|| ParseError::UnsupportedLanguage(language.clone()))?;
        let mut parser = Parser::new();
        parser
            .set_language(grammar)
            .map_err(|e| ParseError::IncompatibleGrammar {
                language: language.to_string(),
                reason: e.to_string(),
            })?;
        let tree = parser.parse(code, None).ok_or(ParseError::ParserFailed)?;
        let (error_count, first_error) = count_errors(&tree);
        Ok(ParseOutcome {
            language: language.clone(),
            ok: error_count == 0,
            error_count,
            first_error,
        })
    }
}

/// Counts ERROR and MISSING nodes in document order.
fn count_errors(tree: &tree_sitter::Tree) -> (usize, Option<(usize, usize)>) {
    let root = tree.root_node();
    if !root.has_error() {
        return (0, None);
    }
    let mut count = 0;
    let mut first = None;
    let mut cursor = root.walk();
    loop {
        let node = cursor.node();
        if node.is_error() || node.is_missing() {
            count += 1;
            if first.is_none() {
                let p = node.start_position();
                first = Some((p.row + 1, p.column + 1));
            }
        }
        // only descend into subtrees that contain an error somewhere
        if node.has_error() && cursor.goto_first_child() {
            continue;
        }
        loop {
            if cursor.goto_next_sibling() {
                break;
            }
            if !cursor.goto_parent() {
                return (count, first);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> LanguageId {
        LanguageId::from_canonical(s)
    }

    #[test]
    fn valid_and_invalid_python() {
        let reg = GrammarRegistry::builtin();
        let ok = reg.validate_syntax("def f():\n    return 1", &id("python")).unwrap();
        assert!(ok.ok);
        assert_eq!(ok.error_count, 0);
        assert_eq!(ok.first_error, None);
        let bad = reg.validate_syntax("def f(:", &id("python")).unwrap();
        assert!(!bad.ok);
        assert!(bad.error_count >= 1);
        assert_eq!(bad.first_error.map(|p| p.0), Some(1));
    }

    #[test]
    fn python_does_not_parse_as_java() {
        let reg = GrammarRegistry::builtin();
        let code = "def has_close_elements(numbers, threshold):\n    for i in range(len(numbers)):\n        for j in range(i + 1, len(numbers)):\n            if abs(numbers[i] - numbers[j]) < threshold:\n                return True\n    return False\n";
        assert!(reg.validate_syntax(code, &id("python")).unwrap().ok);
        assert!(!reg.validate_syntax(code, &id("java")).unwrap().ok);
    }

    #[test]
    fn missing_nodes_count() {
        let reg = GrammarRegistry::builtin();
        let out = reg.validate_syntax("int main() { return 0 }", &id("c")).unwrap();
        assert!(!out.ok);
        assert_eq!(out.error_count, 1);
    }

    #[test]
    fn supported_languages_listing() {
        let langs = GrammarRegistry::builtin().supported_languages();
        for l in ["python", "java", "cpp"] {
            assert!(langs.contains(&id(l)));
        }
        assert!(langs.windows(2).all(|w| w[0] < w[1]));
        assert!(GrammarRegistry::empty().supported_languages().is_empty());

        let mut reg = GrammarRegistry::empty();
        reg.register("lua", builtin_grammar("lua").unwrap()).unwrap();
        assert_eq!(reg.supported_languages(), vec![id("lua")]);
    }

    #[test]
    fn unsupported_language() {
        let reg = GrammarRegistry::empty();
        assert!(matches!(
            reg.validate_syntax("x", &id("python")),
            Err(ParseError::UnsupportedLanguage(_))
        ));
        assert!(matches!(
            GrammarRegistry::builtin().validate_syntax("x", &LanguageId::unknown()),
            Err(ParseError::UnsupportedLanguage(_))
        ));
    }

    #[test]
    fn locations_config() {
        let mut locs = BTreeMap::new();
        locs.insert("python".to_string(), "builtin:python".to_string());
        let reg = GrammarRegistry::from_locations(&locs, Path::new(".")).unwrap();
        assert_eq!(reg.supported_languages(), vec![id("python")]);

        locs.insert("lua".to_string(), "builtin:cobol".to_string());
        assert!(matches!(
            GrammarRegistry::from_locations(&locs, Path::new(".")),
            Err(ParseError::UnknownBuiltin(_))
        ));

        let mut locs = BTreeMap::new();
        locs.insert("lua".to_string(), "no/such/libtree-sitter-lua.so".to_string());
        assert!(matches!(
            GrammarRegistry::from_locations(&locs, Path::new("/nonexistent")),
            Err(ParseError::GrammarLoad { .. })
        ));
    }
}
