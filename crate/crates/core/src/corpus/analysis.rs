use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Bumped whenever a stop list or the tokenizer changes, so persisted
/// indexes built with an older analyzer are detectable.
pub const ANALYZER_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    English,
    Dutch,
    Russian,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::English, Language::Dutch, Language::Russian];

    pub fn code(self) -> &'static str {
        match self {
            Language::English => "en",
            Language::Dutch => "nl",
            Language::Russian => "ru",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::English => "english",
            Language::Dutch => "dutch",
            Language::Russian => "russian",
        }
    }

    fn algorithm(self) -> Algorithm {
        match self {
            Language::English => Algorithm::English,
            Language::Dutch => Algorithm::Dutch,
            Language::Russian => Algorithm::Russian,
        }
    }

    fn stop_words(self) -> &'static [&'static str] {
        match self {
            Language::English => ENGLISH_STOP,
            Language::Dutch => DUTCH_STOP,
            Language::Russian => RUSSIAN_STOP,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_lowercase();
        Language::ALL
            .into_iter()
            .find(|l| l.code() == s || l.name() == s)
            .ok_or(CorpusError::UnsupportedLanguage(s))
    }
}

/// Lowercases, splits on non-letters, drops stop words and stems.
pub struct Analyzer {
    language: Language,
    stemmer: Stemmer,
    stop: HashSet<&'static str>,
}

impl Analyzer {
    pub fn new(language: Language) -> Self {
        Analyzer {
            language,
            stemmer: Stemmer::create(language.algorithm()),
            stop: language.stop_words().iter().copied().collect(),
        }
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Identifier recorded in every index built with this analyzer.
    pub fn id(&self) -> String {
        format!("{}-snowball-stop-v{}", self.language.code(), ANALYZER_VERSION)
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        let lower = text.to_lowercase();
        lower
            .split(|c: char| !c.is_alphabetic())
            .filter(|t| !t.is_empty() && !self.stop.contains(t))
            .map(|t| self.stemmer.stem(t).into_owned())
            .collect()
    }
}

/// One-shot analysis of `text` in `language`.
pub fn analyze(text: &str, language: Language) -> Vec<String> {
    Analyzer::new(language).analyze(text)
}

/// Analysis for a language given by code or name, e.g. `"en"` or `"dutch"`.
pub fn analyze_with(text: &str, language: &str) -> Result<Vec<String>, CorpusError> {
    Ok(analyze(text, Language::from_str(language)?))
}

static ENGLISH_STOP: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it", "no", "not", "of",
    "on", "or", "such", "that", "the", "their", "then", "there", "these", "they", "this", "to", "was", "will", "with",
];

static DUTCH_STOP: &[&str] = &[
    "de", "en", "van", "ik", "te", "dat", "die", "in", "een", "hij", "het", "niet", "zijn", "is", "was", "op", "aan",
    "met", "als", "voor", "had", "er", "maar", "om", "hem", "dan", "zou", "of", "wat", "mijn", "men", "dit", "zo",
    "door", "over", "ze", "zich", "bij", "ook", "tot", "je", "mij", "uit", "der", "daar", "haar", "naar", "heb",
    "hoe", "heeft", "hebben", "deze", "u", "want", "nog", "zal", "me", "zij", "nu", "ge", "geen", "omdat", "iets",
    "worden", "toch", "al", "waren", "veel", "meer", "doen", "toen", "moet", "ben", "zonder", "kan", "hun", "dus",
    "alles", "onder", "ja", "eens", "hier", "wie", "werd", "altijd", "doch", "wordt", "wezen", "kunnen", "ons",
    "zelf", "tegen", "na", "reeds", "wil", "kon", "niets", "uw", "iemand", "geweest", "andere",
];

static RUSSIAN_STOP: &[&str] = &[
    "и", "в", "во", "не", "что", "он", "на", "я", "с", "со", "как", "а", "то", "все", "она", "так", "его", "но",
    "да", "ты", "к", "у", "же", "вы", "за", "бы", "по", "только", "ее", "мне", "было", "вот", "от", "меня", "еще",
    "нет", "о", "из", "ему", "теперь", "когда", "даже", "ну", "вдруг", "ли", "если", "уже", "или", "ни", "быть",
    "был", "него", "до", "вас", "нибудь", "опять", "уж", "вам", "ведь", "там", "потом", "себя", "ничего", "ей",
    "может", "они", "тут", "где", "есть", "надо", "ней", "для", "мы", "тебя", "их", "чем", "была", "сам", "чтоб",
    "без", "будто", "чего", "раз", "тоже", "себе", "под", "будет", "ж", "тогда", "кто", "этот", "того", "потому",
    "этого", "какой", "совсем", "ним", "здесь", "этом", "один", "почти", "мой", "тем", "чтобы", "нее", "сейчас",
    "были", "куда", "зачем", "всех", "никогда", "можно", "при", "наконец", "два", "об", "другой", "хоть", "после",
    "над", "больше", "тот", "через", "эти", "нас", "про", "всего", "них", "какая", "много", "разве", "три", "эту",
    "моя", "впрочем", "хорошо", "свою", "этой", "перед", "иногда", "лучше", "чуть", "том", "нельзя", "такой", "им",
    "более", "всегда", "конечно", "всю", "между",
];
