//! Deterministic planted-intent fixture dataset.
//!
//! Five disjoint "themes", each with its own intent phrases, users, and
//! items. Item descriptions and user profiles quote theme intents verbatim
//! (the offline completion mock extracts double-quoted phrases and ALL-CAPS
//! tokens), interactions stay almost entirely within a theme, and each theme
//! carries a few deliberately sparse users and items so the cold-start slice
//! is never empty. A handful of items ship without descriptions to exercise
//! the open-world expansion path, and a tiny acronym knowledge base grounds
//! jargon that appears in the item texts.
//!
//! The generated files are checked in under `data/synthetic/`; a unit test
//! keeps them byte-identical to [`generate`]\([`BUNDLED_SEED`]\) and an
//! `#[ignore]` test regenerates them after deliberate changes.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed behind the checked-in copy of the dataset.
pub const BUNDLED_SEED: u64 = 49;

/// File names used by [`SyntheticDataset::write_to_dir`].
pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const ITEMS_FILE: &str = "items.tsv";
pub const USERS_FILE: &str = "users.tsv";
pub const KB_FILE: &str = "kb.tsv";

const USERS_PER_THEME: usize = 10;
const ITEMS_PER_THEME: usize = 10;
/// Items `0..POPULAR_ITEMS` are consumed by the theme's heavy users; the
/// rest are touched only by sparse users and stay cold.
const POPULAR_ITEMS: usize = 8;
/// Users `HEAVY_USERS..` have at most three interactions.
const HEAVY_USERS: usize = 7;
const INTERACTIONS_PER_HEAVY_USER: usize = 6;
/// Chance that one of a heavy user's interactions crosses into another
/// theme.
const CROSS_THEME_RATE: f64 = 0.1;

/// One theme: a distinctive token shared by every intent phrase, an item
/// noun for names, and six intent phrases with otherwise disjoint
/// vocabulary.
struct Theme {
    word: &'static str,
    noun: &'static str,
    intents: [&'static str; 6],
    /// Acronym planted in the first few item descriptions, if any.
    acronym: Option<&'static str>,
}

const THEMES: [Theme; 5] = [
    Theme {
        word: "farm",
        noun: "meadow",
        intents: [
            "cozy farm sim",
            "farm crop rotation",
            "farm animal care",
            "relaxing farm chores",
            "farm market trading",
            "seasonal farm festivals",
        ],
        acronym: None,
    },
    Theme {
        word: "rogue",
        noun: "depths",
        intents: [
            "tight rogue runs",
            "rogue deck synergy",
            "procedural rogue maps",
            "rogue boss gauntlets",
            "rogue relic builds",
            "quick rogue sessions",
        ],
        acronym: Some("RPG"),
    },
    Theme {
        word: "space",
        noun: "orbit",
        intents: [
            "open space exploration",
            "space fleet logistics",
            "space station habitats",
            "zero gravity mining",
            "space trade convoys",
            "deep space scanning",
        ],
        acronym: Some("NPC"),
    },
    Theme {
        word: "puzzle",
        noun: "atrium",
        intents: [
            "logic puzzle chains",
            "puzzle grid deduction",
            "gentle puzzle escalation",
            "spatial puzzle rooms",
            "puzzle hint economy",
            "daily puzzle ladders",
        ],
        acronym: None,
    },
    Theme {
        word: "racing",
        noun: "apex",
        intents: [
            "arcade racing drifts",
            "racing time trials",
            "racing pit strategy",
            "night racing circuits",
            "racing ghost rivals",
            "offroad racing rallies",
        ],
        acronym: Some("VR"),
    },
];

/// Knowledge-base rows: acronym → explanation that spells the jargon out in
/// the acronym's own theme vocabulary.
const KB_ENTRIES: [(&str, &str); 3] = [
    ("RPG", "character builds and quests layered over rogue style runs"),
    ("NPC", "scripted crew members found around space stations"),
    ("VR", "headset view for immersive racing lines"),
];

/// The four dataset files as in-memory TSV text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticDataset {
    pub interactions: String,
    pub items: String,
    pub users: String,
    pub kb: String,
}

impl SyntheticDataset {
    /// Write the four files into `dir` (created if missing).
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(INTERACTIONS_FILE), &self.interactions)?;
        std::fs::write(dir.join(ITEMS_FILE), &self.items)?;
        std::fs::write(dir.join(USERS_FILE), &self.users)?;
        std::fs::write(dir.join(KB_FILE), &self.kb)?;
        Ok(())
    }
}

fn user_key(theme: usize, index: usize) -> String {
    format!("user-t{theme}-{index:02}")
}

fn item_key(theme: usize, index: usize) -> String {
    format!("item-t{theme}-{index:02}")
}

fn item_name(theme: usize, index: usize) -> String {
    format!("{} {} {index}", THEMES[theme].word, THEMES[theme].noun)
}

/// True for the items shipped without a description (one in each of the
/// first three themes, among the popular ones so the expansion path sees
/// real traffic).
fn lacks_description(theme: usize, index: usize) -> bool {
    theme < 3 && index == 7
}

fn item_description(theme: usize, index: usize) -> String {
    let t = &THEMES[theme];
    let a = t.intents[(2 * index) % t.intents.len()];
    let b = t.intents[(2 * index + 1) % t.intents.len()];
    let mut desc = format!(
        "A {} adventure built around \"{a}\" and \"{b}\". Fans of {} worlds keep coming back.",
        t.word, t.word
    );
    if index < 4 {
        if let Some(acronym) = t.acronym {
            let _ = write!(desc, " Ships with {acronym} flavor throughout.");
        }
    }
    desc
}

fn user_profile(theme: usize, index: usize) -> Option<String> {
    // One heavy user per theme has no profile row, exercising the
    // synthesized-from-history path in the densify stage.
    if index == 6 {
        return None;
    }
    let t = &THEMES[theme];
    let a = t.intents[index % t.intents.len()];
    if index >= HEAVY_USERS {
        return Some(format!("New to {} worlds, wants \"{a}\".", t.word));
    }
    let b = t.intents[(index + 2) % t.intents.len()];
    Some(format!(
        "Always hunting for \"{a}\" and \"{b}\" in {} worlds.",
        t.word
    ))
}

/// Build the dataset. Every byte is a pure function of `seed`.
pub fn generate(seed: u64) -> SyntheticDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut interactions = String::from("user_id\titem_id\ttimestamp\n");
    let mut stamp: i64 = 1_700_000_000;
    let push_interaction = |out: &mut String, user: String, item: String, stamp: &mut i64| {
        let _ = writeln!(out, "{user}\t{item}\t{stamp}");
        *stamp += 3600;
    };

    for theme in 0..THEMES.len() {
        for u in 0..USERS_PER_THEME {
            let user = user_key(theme, u);
            if u < HEAVY_USERS {
                for j in 0..INTERACTIONS_PER_HEAVY_USER {
                    let cross = rng.gen::<f64>() < CROSS_THEME_RATE;
                    let item = if cross {
                        let other = (theme + 1 + rng.gen_range(0..THEMES.len() - 1))
                            % THEMES.len();
                        item_key(other, rng.gen_range(0..POPULAR_ITEMS))
                    } else {
                        item_key(theme, (u + j) % POPULAR_ITEMS)
                    };
                    push_interaction(&mut interactions, user.clone(), item, &mut stamp);
                }
            } else {
                // Sparse users stick to the cold tail of their own theme,
                // keeping both endpoints of those interactions low-degree.
                match u - HEAVY_USERS {
                    0 => {
                        let item = item_key(theme, POPULAR_ITEMS);
                        push_interaction(&mut interactions, user.clone(), item, &mut stamp);
                    }
                    1 => {
                        let item = item_key(theme, POPULAR_ITEMS + 1);
                        push_interaction(&mut interactions, user.clone(), item, &mut stamp);
                    }
                    _ => {
                        for cold in 0..2 {
                            let item = item_key(theme, POPULAR_ITEMS + cold);
                            push_interaction(&mut interactions, user.clone(), item, &mut stamp);
                        }
                        let extra = item_key(theme, (u * u) % POPULAR_ITEMS);
                        push_interaction(&mut interactions, user.clone(), extra, &mut stamp);
                    }
                }
            }
        }
    }

    let mut items = String::from("item_id\tname\tdescription\tattributes\n");
    for theme in 0..THEMES.len() {
        for i in 0..ITEMS_PER_THEME {
            let description = if lacks_description(theme, i) {
                String::new()
            } else {
                item_description(theme, i)
            };
            let _ = writeln!(
                items,
                "{}\t{}\t{}\tgenre={}; mode=single",
                item_key(theme, i),
                item_name(theme, i),
                description,
                THEMES[theme].word,
            );
        }
    }

    let mut users = String::from("user_id\tprofile\n");
    for theme in 0..THEMES.len() {
        for u in 0..USERS_PER_THEME {
            if let Some(profile) = user_profile(theme, u) {
                let _ = writeln!(users, "{}\t{}", user_key(theme, u), profile);
            }
        }
    }

    let mut kb = String::new();
    for (key, explanation) in KB_ENTRIES {
        let _ = writeln!(kb, "{key}\t{explanation}");
    }

    SyntheticDataset {
        interactions,
        items,
        users,
        kb,
    }
}

/// Every planted intent phrase, in theme order; the expected core of the
/// extracted vocabulary.
pub fn planted_intents() -> Vec<&'static str> {
    THEMES.iter().flat_map(|t| t.intents).collect()
}
