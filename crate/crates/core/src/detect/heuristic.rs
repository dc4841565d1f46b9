//! Built-in pattern-evidence language detector.
//!
//! Each language carries a table of regular expressions with weights. A
//! snippet's score for a language is the sum of `weight * min(matches, cap)`
//! over that language's rules; negative weights record evidence against a
//! language (e.g. statement-terminating semicolons against Python).

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{Detector, DetectorUnavailable, DetectorVote};
use crate::corpus::{LanguageId, LanguageRegistry};

pub const HEURISTIC_DETECTOR_ID: &str = "heuristic";

/// Minimum top score for a non-`unknown` verdict.
pub const DEFAULT_SCORE_FLOOR: f64 = 2.0;

const DEFAULT_CAP: usize = 3;

struct Rule {
    language: &'static str,
    weight: f64,
    pattern: Regex,
}

#[rustfmt::skip]
const RULES: &[(&str, f64, &str)] = &[
    // python
    ("python", 6.0, r"^\s*(async\s+)?def \w+\s*\([^)]*\)\s*(->\s*[^:]+)?:\s*(#.*)?$"),
    ("python", 4.0, r"^\s*class \w+(\([^)]*\))?:\s*$"),
    ("python", 4.0, r"^\s*from [\w.]+ import \w"),
    ("python", 3.0, r"^import [a-z_][\w.]*(\s+as \w+)?(,\s*[\w.]+)*\s*$"),
    ("python", 3.0, r"^\s*(if|elif|while|for|with|try|except|else|finally)\b.*:\s*$"),
    ("python", 3.0, r"\belif\b"),
    ("python", 3.0, r"\bself\.\w"),
    ("python", 3.0, r"__\w+__"),
    ("python", 3.0, r"\bin range\("),
    ("python", 3.0, r"\blambda\b[\w\s,]*:"),
    ("python", 3.0, r"\braise \w+"),
    ("python", 2.0, r"\bexcept\b"),
    ("python", 2.0, r"(?:^|[^.\w])len\("),
    ("python", 1.5, r"\b(True|False|None)\b"),
    ("python", 1.0, r"^\s*# "),
    ("python", 1.0, r"\bprint\("),
    ("python", 2.0, r"\b(isinstance|enumerate|zip)\("),
    ("python", -1.5, r";\s*$"),
    ("python", -1.5, r"\{\s*$"),
    // java
    ("java", 6.0, r"System\.out\.print"),
    ("java", 6.0, r"public\s+static\s+void\s+main\s*\(\s*String"),
    ("java", 5.0, r"^import java\."),
    ("java", 4.0, r"^\s*package [\w.]+;"),
    ("java", 3.0, r"\b(public|private|protected)\s+(static\s+)?(final\s+)?[\w<>\[\],]+\s+\w+\s*\([^)]*\)\s*(throws [\w, ]+)?\{"),
    ("java", 2.0, r"@Override\b"),
    ("java", 2.0, r"\bString\[\]"),
    ("java", 2.0, r"\b(ArrayList|HashMap|HashSet|LinkedList|StringBuilder|Integer|Scanner)\b"),
    ("java", 3.0, r"\bboolean\b"),
    ("java", 1.0, r"\bclass \w+( extends \w+)?( implements [\w, ]+)?\s*\{"),
    ("java", 2.0, r"\.equals\("),
    ("java", 1.0, r"\.size\(\)"),
    ("java", 2.0, r"\.(get|put|add|getOrDefault|charAt|substring|toCharArray)\("),
    ("java", 2.0, r"\bString\s+\w+\s*[=;,)]"),
    // csharp
    ("csharp", 6.0, r"^using System(\.[\w.]+)?;"),
    ("csharp", 6.0, r"Console\.Write(Line)?\("),
    ("csharp", 6.0, r"\bstatic\s+(async\s+)?(void|int|Task)\s+Main\s*\("),
    ("csharp", 4.0, r"\{\s*get;\s*(private\s+)?set;\s*\}"),
    ("csharp", 3.0, r"^\s*namespace [A-Z][\w.]*\s*(;|$)"),
    ("csharp", 2.0, r"(?:^|[^:\w.<])string\s+\w+\s*[=;,)]"),
    ("csharp", 3.0, r"\bforeach\s*\(\s*\w+\s+\w+\s+in\b"),
    ("csharp", 3.0, r"\b(Dictionary|IList|IEnumerable|IDictionary|ICollection)<"),
    ("csharp", 3.0, r"\boverride\s+(string|int|bool|void|double)\b"),
    ("csharp", 2.0, r"\.(Length|Count)\b|\.(Add|ContainsKey|TryGetValue|ToString|Select|Where|ToList|ToCharArray|Reverse|Sum)\("),
    ("csharp", 2.0, r"\bvar \w+ = new\b"),
    ("csharp", 3.0, r#"\$""#),
    ("csharp", 3.0, r"\basync\s+Task\b|\bTask<"),
    ("csharp", 1.0, r"^\s*\{\s*$"),
    ("csharp", 2.0, r"\bclass \w+\s*:\s*I[A-Z]\w*"),
    ("csharp", 2.0, r"\bpublic\s+(static\s+)?(string|int|bool|double|void)\s+[A-Z]\w*\s*\("),
    ("csharp", 1.0, r"\breadonly\b"),
    ("csharp", 1.0, r"\?\?"),
    // cpp
    ("cpp", 5.0, r"#include\s*<(iostream|vector|string|map|set|unordered_map|unordered_set|algorithm|memory|bits/stdc\+\+\.h|cmath|cstdio|cstdlib|cstring|queue|stack|utility|numeric|sstream|functional|array|deque|climits|tuple|iomanip|fstream|list|optional|thread|mutex|chrono|random)>"),
    ("cpp", 5.0, r"\bstd::"),
    ("cpp", 5.0, r"using namespace std;"),
    ("cpp", 4.0, r"\b(cout|cin|endl|cerr)\b"),
    ("cpp", 4.0, r"^\s*template\s*<"),
    ("cpp", 3.0, r"\bnullptr\b"),
    ("cpp", 3.0, r"^\s*(public|private|protected):\s*$"),
    ("cpp", 2.0, r"\bauto\b"),
    ("cpp", 3.0, r"\bvector<"),
    ("cpp", 1.0, r"\w::\w"),
    ("cpp", 3.0, r"\bconst\s+[\w:<>]+\s*&"),
    ("cpp", 3.0, r"\b[\w:<>]+&\s+\w+\s*[,)]"),
    ("cpp", 1.0, r"\b(int|void|bool|double|float|long|char|size_t)\s+\**\w+\s*\("),
    ("cpp", 1.0, r"\bINT_(MAX|MIN)\b"),
    ("cpp", 1.0, r"\bint\s+main\s*\(\s*\)"),
    ("cpp", 1.0, r"^\s*\};\s*$"),
    // c
    ("c", 4.0, r"#include\s*<\w+\.h>"),
    ("c", 3.0, r"\b(printf|scanf|fprintf|sprintf|puts|fgets|getchar|putchar)\s*\("),
    ("c", 3.0, r"\b(malloc|calloc|realloc|free)\s*\("),
    ("c", 3.0, r"\bint\s+main\s*\(\s*void\s*\)"),
    ("c", 1.0, r"\bint\s+main\s*\(\s*\)"),
    ("c", 3.0, r"\btypedef\b"),
    ("c", 2.0, r"\bstruct \w+\s*\*"),
    ("c", 1.0, r"\bsize_t\b"),
    ("c", 2.0, r"#define\b"),
    ("c", 2.0, r"\bNULL\b"),
    ("c", 1.5, r"\b(int|void|bool|double|float|long|char|size_t|unsigned)\s+\**\w+\s*\("),
    ("c", 2.0, r"\bchar\s*\*"),
    ("c", 1.0, r"\bINT_(MAX|MIN)\b"),
    // javascript
    ("javascript", 5.0, r"console\.log\("),
    ("javascript", 4.0, r#"\brequire\(['"]"#),
    ("javascript", 4.0, r"module\.exports"),
    ("javascript", 3.0, r"\bfunction\s*\*?\s*\w*\s*\(([^)$:]*)\)\s*\{"),
    ("javascript", 2.0, r"\b(const|let)\s+(\w+|\[[^\]]*\]|\{[^}]*\})\s*="),
    ("javascript", 1.0, r"=>"),
    ("javascript", 3.0, r"===|!=="),
    ("javascript", 3.0, r"\bdocument\.|\bwindow\.|addEventListener"),
    ("javascript", 2.0, r"\bvar\s+\w+\s*=\s*(function|\{|\[|require)"),
    ("javascript", 2.0, r"\.(forEach|push|map|filter|reduce|slice|split|join)\("),
    ("javascript", 1.0, r"\bthis\.\w+\s*="),
    ("javascript", 1.0, r"\bexport\s+(default\s+)?(function|const|class)\b"),
    ("javascript", 1.5, r"\bnew (Error|Set|Map|Promise|Array)\("),
    ("javascript", 2.0, r"\basync\s+function\b"),
    ("javascript", 1.0, r"\bundefined\b"),
    ("javascript", 2.0, r"\bconstructor\s*\("),
    ("javascript", 1.0, r"\?\?"),
    ("javascript", 2.0, r"\bJSON\.|\bparseInt\(|\bsetTimeout\(|\bfetch\("),
    ("javascript", -3.0, r"\w\s*\??:\s*(number|string|boolean|void|any|unknown|never)\b"),
    ("javascript", -3.0, r"^\s*(export\s+)?(interface|type|enum)\s+\w+"),
    ("javascript", -2.0, r"\b(private|public|protected|readonly)\s+\w+"),
    // typescript
    ("typescript", 5.0, r"\w\s*\??:\s*(number|string|boolean|void|any|unknown|never)(\[\])?\b"),
    ("typescript", 4.0, r"console\.log\("),
    ("typescript", 2.0, r"^\s*(export\s+)?interface\s+\w+\s*(<[^>]*>)?\s*(extends [\w, <>]+)?\{"),
    ("typescript", 3.0, r"^\s*(export\s+)?type\s+\w+(<[^>]*>)?\s*="),
    ("typescript", 3.0, r"\b(private|public|protected|readonly)\s+(readonly\s+)?\w+\s*\??:\s*\w"),
    ("typescript", 4.0, r"\bfunction\s+\w+\s*(<[^>]*>)?\s*\([^)$]*:[^)]*\)"),
    ("typescript", 2.0, r"\)\s*:\s*[\w<>\[\]| .]+\s*(\{|=>)"),
    ("typescript", 1.5, r"\bnew \w+<\w+(,\s*\w+)?>\("),
    ("typescript", 1.5, r"\b(const|let)\s+(\w+|\[[^\]]*\]|\{[^}]*\})\s*(:[^=]+)?="),
    ("typescript", 1.0, r"=>"),
    ("typescript", 2.0, r"===|!=="),
    ("typescript", 1.5, r"\.(forEach|push|map|filter|reduce|slice|split|join)\("),
    ("typescript", 1.0, r"\bthis\.\w+"),
    ("typescript", 1.0, r"\bexport\s+(default\s+)?(function|const|class|async)\b"),
    ("typescript", 1.0, r"\?\?"),
    ("typescript", 2.0, r"\bPromise<|\bas\s+(const|T\b|[A-Z]\w*)"),
    ("typescript", 2.0, r"\benum\s+[A-Z]\w*\s*\{"),
    ("typescript", 1.0, r"\bundefined\b"),
    // php
    ("php", 8.0, r"<\?php"),
    ("php", 3.0, r"\$\w+\s*(=[^=>]|\[|->)"),
    ("php", 3.0, r"\$this->"),
    ("php", 3.0, r"\becho\b"),
    ("php", 3.0, r"\bfunction\s+\w+\s*\([^)]*\$"),
    ("php", 2.0, r"\b(array_\w+|count|strlen|implode|explode|str_\w+|preg_\w+|print_r|var_dump|isset|strtolower|strrev)\("),
    ("php", 3.0, r"\bforeach\s*\(\s*\$"),
    ("php", 1.0, r"\.\s*\$\w+|\$\w+\s*\.\s*"),
    // lua
    ("lua", 4.0, r"\blocal\s+(function\s+)?\w+"),
    ("lua", 3.0, r"\bthen\b"),
    ("lua", 3.0, r"~="),
    ("lua", 1.0, r"\bnil\b"),
    ("lua", 3.0, r"\b(ipairs|pairs)\("),
    ("lua", 3.0, r#"["')]\s*\.\.\s|\s\.\.\s*["'(\w]"#),
    ("lua", 1.5, r"^\s*end\s*$"),
    ("lua", 2.0, r"^\s*(local\s+)?function\s+[\w.:]+\s*\([^)]*\)\s*$"),
    ("lua", 3.0, r"\btable\.(insert|remove|concat|sort|unpack)\b|\bstring\.(format|sub|gmatch|gsub|rep|byte|char)\b"),
    ("lua", 2.0, r"\bmath\.(floor|huge)\b"),
    ("lua", 3.0, r"^\s*(for|while)\b.*\bdo\s*$"),
    ("lua", 1.0, r"\w:\w+\("),
    ("lua", 1.0, r"^\s*--"),
    ("lua", 3.0, r"\bsetmetatable\b"),
    ("lua", 2.0, r"[=,(\s]#\w"),
    ("lua", 1.5, r"\belseif\b"),
    ("lua", 2.0, r"\bfunction\s*\([^)]*\)\s*return\b"),
    ("lua", -1.0, r";\s*$"),
    // kotlin
    ("kotlin", 5.0, r"\bfun\s+(<[^>]*>\s*)?[\w.]+\s*\("),
    ("kotlin", 2.0, r"\bval\s+\w+(\s*:\s*\w+)?\s*="),
    ("kotlin", 1.0, r"\bvar\s+\w+\s*(:\s*\w+)?\s*="),
    ("kotlin", 4.0, r"\b(listOf|mutableListOf|mapOf|mutableMapOf|setOf|arrayOf|intArrayOf|emptyList|hashMapOf)\b"),
    ("kotlin", 3.0, r"\bwhen\s*(\(|\{)"),
    ("kotlin", 2.0, r"\?:\s"),
    ("kotlin", 2.0, r"\w!!"),
    ("kotlin", 4.0, r"\bdata class\b"),
    ("kotlin", 1.5, r"\bprintln\("),
    ("kotlin", 2.0, r"(?:^|[^:]):\s*(Int|Long|Double|Boolean|Unit|Any|IntArray|String)\??\b"),
    ("kotlin", 2.0, r"\bit\.\w"),
    ("kotlin", 3.0, r"\b(until|downTo)\b"),
    ("kotlin", 2.0, r"\bis\s+[A-Z]\w*\s*->"),
    ("kotlin", 2.0, r"\brepeat\(|\.indices\b"),
    ("kotlin", 3.0, r"\boverride fun\b|\bcompanion object\b"),
    ("kotlin", 1.0, r"\bobject\s+\w+"),
    ("kotlin", -0.5, r";\s*$"),
    // scala
    ("scala", 6.0, r"\bdef[ \t]+\w+(\[[^\]]*\])?(\([^)]*\))*[ \t]*(:[ \t]*[\w\[\], ]+)?[ \t]*=(\s|$)"),
    ("scala", 4.0, r"\bobject\s+\w+"),
    ("scala", 5.0, r"\bextends App\b"),
    ("scala", 4.0, r"\bcase class\b"),
    ("scala", 2.0, r"\bcase\s+[^=]*=>"),
    ("scala", 3.0, r"\b(List|Seq|Array|Map|Option|Set|Vector)\["),
    ("scala", 4.0, r"\bsealed trait\b"),
    ("scala", 2.0, r"\btrait\s+\w+"),
    ("scala", 5.0, r"\bimport scala\."),
    ("scala", 3.0, r":\s*Unit\b"),
    ("scala", 2.0, r"\bval\s+\w+(\s*:\s*[\w\[\]]+)?\s*="),
    ("scala", 1.0, r"\bvar\s+\w+\s*(:\s*\w+)?\s*="),
    ("scala", 2.0, r"\(_\.\w+|\b\w+\(_\)|[(%]\s*_\s*[)!=<>+\-*/%]"),
    ("scala", 3.0, r"\bmatch\s*\{"),
    ("scala", 3.0, r#"\bs"[^"]*\$"#),
    ("scala", 2.0, r"\(\s*\w+\s*<-"),
    ("scala", 3.0, r"\bmkString\b|\bforall\b|\bgroupBy\b"),
    ("scala", 2.0, r"\bSome\("),
    ("scala", 1.5, r"\bprintln\("),
    ("scala", 1.0, r":\s*(Int|Double|Boolean|String|Long|BigInt)\b"),
    ("scala", 2.0, r"\s(until|to)\s"),
    ("scala", -0.5, r";\s*$"),
    // go
    ("go", 6.0, r"^package\s+\w+\s*$"),
    ("go", 5.0, r"\bfunc\s+(\(\w+\s+\*?\w+\)\s*)?\w+\s*\("),
    ("go", 3.0, r":="),
    ("go", 4.0, r"\bfmt\.\w+"),
    ("go", 3.0, r#"^import\s*\(\s*$|^import\s+""#),
    ("go", 3.0, r"\bchan\b"),
    ("go", 1.0, r"<-"),
    ("go", 3.0, r"\bdefer\b|\bgo\s+func\b"),
    ("go", 4.0, r"\berr != nil\b"),
    ("go", 2.0, r"(?:^|[^.\w])(make|append)\("),
    ("go", 3.0, r"\[\]\*?[a-zA-Z]"),
    ("go", 4.0, r"\bmap\[\w+\]\w+"),
    ("go", 2.0, r"\brange\s+\w"),
    ("go", 1.0, r"\bnil\b"),
    ("go", -1.0, r";\s*$"),
    // rust
    ("rust", 5.0, r"\bfn\s+\w+\s*(<[^>]*>)?\s*\("),
    ("rust", 4.0, r"\blet\s+(mut\b|\(\s*mut\b)"),
    ("rust", 4.0, r"\b(println|print|eprintln|eprint|vec|format|assert|assert_eq|assert_ne|panic|write|writeln|matches|todo|unimplemented|dbg)!\s*[(\[{]"),
    ("rust", 1.0, r"\w!\("),
    ("rust", 4.0, r"^\s*use\s+(std|crate|super|self)::"),
    ("rust", 3.0, r"\bimpl\b(<[^>]*>)?\s+[\w<>]+"),
    ("rust", 3.0, r"&mut\s|&self\b|&str\b"),
    ("rust", 2.0, r"\b(i8|i16|i32|i64|i128|u8|u16|u32|u64|u128|usize|isize|f32|f64)\b"),
    ("rust", 3.0, r"\bmatch\s+[\w.&*()]+\s*\{"),
    ("rust", 2.0, r"\bSome\(|\bOk\(|\bErr\("),
    ("rust", 3.0, r"\bpub\s+(fn|struct|enum|mod|trait|crate)\b"),
    ("rust", 4.0, r"#\[derive\("),
    ("rust", 2.0, r"\.unwrap\(\)|\.iter\(\)|\.collect\(\)|\.to_string\(\)"),
    ("rust", 1.0, r"::new\("),
    ("rust", 1.0, r"\w::\w"),
    ("rust", 2.0, r"\|\w+\|"),
    ("rust", 2.0, r"\btrait\s+\w+"),
    ("rust", 2.0, r"\blet\s+\w+\s*(:\s*[\w<>&\[\]]+)?\s*="),
    // haskell
    ("haskell", 6.0, r"^[a-z_]\w*'?\s+::\s+\S"),
    ("haskell", 5.0, r"^module\s+[A-Z][\w.]*(\s*\(.*\))?\s+where"),
    ("haskell", 3.0, r"^import\s+(qualified\s+)?[A-Z][\w.]*"),
    ("haskell", 3.0, r"\bwhere\s*$"),
    ("haskell", 3.0, r"^\s*\|\s+.*="),
    ("haskell", 4.0, r"\bdata\s+[A-Z]\w*.*="),
    ("haskell", 4.0, r"\bnewtype\b"),
    ("haskell", 3.0, r"\b(putStrLn|putStr|getLine|getContents|mapM_|foldr|foldl|zipWith|fromIntegral)\b"),
    ("haskell", 3.0, r"\b(Maybe|Just|Nothing)\b"),
    ("haskell", 2.0, r"\$\s"),
    ("haskell", 3.0, r"\\\w+\s*->"),
    ("haskell", 2.0, r"\s\+\+\s"),
    ("haskell", 3.0, r"`[a-z]\w*`"),
    ("haskell", 1.0, r"<-"),
    ("haskell", 1.0, r"^\s*--"),
    ("haskell", 2.0, r"\s/=\s"),
    ("haskell", -1.0, r";\s*$"),
    // dart
    ("dart", 6.0, r"^import\s+'(dart|package):"),
    ("dart", 4.0, r"\bvoid\s+main\s*\(\s*\)\s*(async\s*)?\{"),
    ("dart", 1.0, r"\bprint\("),
    ("dart", 2.0, r"\bprint\('"),
    ("dart", 3.0, r"\bfinal\s+\w+\s*="),
    ("dart", 1.5, r"^\s*(int|double|String|bool|void|dynamic|num|List<[\w<>, ]+>|Map<[\w<>, ]+>)\s+\w+\s*\([^)]*\)\s*(async\s*)?(\{|=>)"),
    ("dart", 2.0, r"\bList<(int|double|String|bool|num|dynamic)>"),
    ("dart", 3.0, r"'[^'\n]*\$\{?\w[^'\n]*'"),
    ("dart", 4.0, r"@override\b"),
    ("dart", 3.0, r"\b(late|required)\s"),
    ("dart", 3.0, r"\bFuture<|\bStream<"),
    ("dart", 1.0, r"\.(isEmpty|isNotEmpty|removeLast|toList|reversed)\b"),
    ("dart", 1.0, r"\bvar\s+\w+\s*="),
    ("dart", 4.0, r"<\w+(,\s*\w+)?>\s*[\[{]"),
    ("dart", 2.0, r"\b\w+\?\s+\w+\s*(=|;|\()"),
    ("dart", 1.0, r"\?\?"),
    ("dart", 4.0, r"\w+\(this\.\w+"),
    ("dart", 2.0, r"\bget\s+\w+\s*=>"),
    ("dart", 3.0, r"\bRegExp\(r?'"),
    ("dart", 2.0, r"[(,\s]r'[^'\n]*'"),
    // julia
    ("julia", 5.0, r"\w::(Int|Int64|Int32|Float64|Float32|String|Bool|Vector|Matrix|Array|Dict|AbstractString|Integer|Real|Number|Any|[A-Z]\w*)\b"),
    ("julia", 3.0, r"^\s*function\s+[\w.!]+\s*(\{[^}]*\})?\([^)]*\)\s*(::\s*\w+)?\s*(where.*)?$"),
    ("julia", 1.5, r"\bprintln\("),
    ("julia", 4.0, r"\bin\s+[\w()+\- ]+:\w"),
    ("julia", 4.0, r"^\s*(mutable\s+)?struct\s+\w+(\{[^}]*\})?(\s*<:\s*\w+)?\s*$"),
    ("julia", 4.0, r"^\s*using\s+[A-Z][\w.]*(\s*:\s*.*)?\s*$"),
    ("julia", 3.0, r"\b(push|pop|sort|append|empty|delete|deleteat|insert|filter|map|fill|reverse|unique|popfirst|pushfirst|setindex|get)!\("),
    ("julia", 1.0, r"\w!\("),
    ("julia", 2.0, r"\w!\([^)]*\)\s*="),
    ("julia", 1.5, r"^\s*end\s*$"),
    ("julia", 1.5, r"\^\d|\.\^|\.\+|\.\*"),
    ("julia", 4.0, r"\b[A-Z]\w*\{[A-Z][\w, ]*\}"),
    ("julia", 3.0, r"\bwhere\s*\{"),
    ("julia", 4.0, r"\babstract type\b"),
    ("julia", 2.0, r#""[^"\n]*\$\(?\w"#),
    ("julia", 2.0, r"^\s*for\s+\w+\s+in\s+[^{]*[^:{\s]\s*$"),
    ("julia", 3.0, r"\bnothing\b|\bisa\("),
    ("julia", 1.5, r"\belseif\b"),
    ("julia", 2.0, r"\blength\("),
    ("julia", 3.0, r"\[[\d.]+ [\d.]+;"),
    ("julia", 2.0, r"&& return\b|\|\| return\b"),
    ("julia", 2.0, r"^\w+\([^)]*\)\s*=\s"),
    ("julia", -1.0, r";\s*$"),
];

static COMPILED: LazyLock<Vec<Rule>> = LazyLock::new(|| {
    RULES
        .iter()
        .map(|&(language, weight, pattern)| Rule {
            language,
            weight,
            pattern: Regex::new(&format!("(?m){pattern}"))
                .unwrap_or_else(|e| panic!("bad detector pattern {pattern:?}: {e}")),
        })
        .collect()
});

/// Raw per-language evidence for `code`, restricted to `languages`.
/// Negative totals are clamped to zero.
pub fn language_scores(code: &str, languages: &[LanguageId]) -> BTreeMap<LanguageId, f64> {
    let mut scores: BTreeMap<LanguageId, f64> =
        languages.iter().map(|l| (l.clone(), 0.0)).collect();
    for rule in COMPILED.iter() {
        let Some(score) = scores.get_mut(&LanguageId::from_canonical(rule.language)) else {
            continue;
        };
        let hits = rule.pattern.find_iter(code).take(DEFAULT_CAP).count();
        *score += rule.weight * hits as f64;
    }
    for v in scores.values_mut() {
        *v = v.max(0.0);
    }
    scores
}

/// Languages the built-in rule table knows about.
pub fn covered_languages() -> Vec<&'static str> {
    let mut langs: Vec<&str> = RULES.iter().map(|r| r.0).collect();
    langs.sort_unstable();
    langs.dedup();
    langs
}

#[derive(Debug, Clone)]
pub struct HeuristicDetector {
    languages: Vec<LanguageId>,
    floor: f64,
}

impl HeuristicDetector {
    pub fn new(registry: &LanguageRegistry) -> Self {
        Self::with_floor(registry, DEFAULT_SCORE_FLOOR)
    }

    pub fn with_floor(registry: &LanguageRegistry, floor: f64) -> Self {
        HeuristicDetector {
            languages: registry.languages(),
            floor,
        }
    }

    /// Scores every registry language and turns the winner's margin over the
    /// runner-up into a confidence: `top / (top + second)`.
    pub fn classify(&self, code: &str) -> DetectorVote {
        let scores = language_scores(code, &self.languages);
        let mut ranked: Vec<(&LanguageId, f64)> = scores.iter().map(|(l, s)| (l, *s)).collect();
        // stable sort keeps lexicographic order among equal scores
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (top_lang, top) = ranked.first().map(|(l, s)| ((*l).clone(), *s)).unwrap_or((LanguageId::unknown(), 0.0));
        let second = ranked.get(1).map(|(_, s)| *s).unwrap_or(0.0);
        if top < self.floor {
            return DetectorVote {
                detector_id: HEURISTIC_DETECTOR_ID.to_string(),
                label: LanguageId::unknown(),
                confidence: 0.0,
            };
        }
        DetectorVote {
            detector_id: HEURISTIC_DETECTOR_ID.to_string(),
            label: top_lang,
            confidence: top / (top + second),
        }
    }
}

impl Detector for HeuristicDetector {
    fn id(&self) -> &str {
        HEURISTIC_DETECTOR_ID
    }

    fn detect(&self, code: &str) -> Result<DetectorVote, DetectorUnavailable> {
        Ok(self.classify(code))
    }
}

/// Runs the built-in detector with the default registry and floor.
pub fn detect_heuristic(code: &str) -> DetectorVote {
    static DEFAULT: LazyLock<HeuristicDetector> =
        LazyLock::new(|| HeuristicDetector::new(&LanguageRegistry::default()));
    DEFAULT.classify(code)
}
