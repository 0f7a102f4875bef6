//! Prompt cases pinned by the checked-in golden files.

use cmrag_core::pipeline::prompt::{assemble_prompt, PromptBundle, QuestionSlot};
use cmrag_core::pipeline::Mode;

pub const GOLDEN_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden");

pub fn cases() -> Vec<(&'static str, PromptBundle)> {
    let rag = assemble_prompt(
        Mode::E2eRag,
        &QuestionSlot::Speech,
        &[
            "The Laleli Mosque is an 18th-century Ottoman imperial mosque in Laleli, Fatih, Istanbul.",
            "Esma Sultan Mansion is a historical yali located on the Bosphorus in the Ortaköy neighborhood of Istanbul.",
        ],
    )
    .unwrap();
    let no_rag = assemble_prompt::<&str>(
        Mode::NoRag,
        &QuestionSlot::Text(
            "Are the Laleli Mosque and Esma Sultan Mansion located in the same neighborhood?".into(),
        ),
        &[],
    )
    .unwrap();
    let facts = assemble_prompt(
        Mode::Facts,
        &QuestionSlot::Text(
            "What government position was held by the woman who portrayed Corliss Archer in the film Kiss and Tell?"
                .into(),
        ),
        &[
            "Kiss and Tell is a 1945 American comedy film starring then 17-year-old Shirley Temple as Corliss Archer.",
            "Shirley Temple Black served as Chief of Protocol of the United States.",
        ],
    )
    .unwrap();
    vec![("prompt_rag.txt", rag), ("prompt_no_rag.txt", no_rag), ("prompt_facts.txt", facts)]
}

/// Returns the first mismatching golden file, if any.
pub fn check_goldens() -> Result<(), String> {
    for (file, bundle) in cases() {
        let path = format!("{GOLDEN_DIR}/{file}");
        let want = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
        let got = bundle.render();
        if got != want {
            return Err(format!("{file} differs:\n--- golden\n{want}\n--- rendered\n{got}"));
        }
        for needle in ["Use the following pieces of retrieved context", "13 text tokens followed by 26 audio tokens"] {
            if !want.contains(needle) {
                return Err(format!("{file} lacks {needle:?}"));
            }
        }
    }
    Ok(())
}
