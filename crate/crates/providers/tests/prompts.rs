use std::fs;
use std::path::PathBuf;

use sea_core::dataset::Element;
use sea_providers::prompts::*;
use sea_providers::{ExtractionPrompt, YesNoTemplate};

fn golden(rel: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(rel);
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn elements(class: &str, names: &[&str]) -> Vec<Element> {
    names
        .iter()
        .map(|n| Element {
            id: format!("{class}.{n}"),
            name: n.to_string(),
            optional: false,
            importance_score: None,
            extra: Default::default(),
        })
        .collect()
}

#[test]
fn templates_match_transcriptions() {
    for (text, file) in [
        (CAPTION_SYSTEM, "caption_system"),
        (CAPTION_USER, "caption_user"),
        (EXTRACTION_DETAILED, "extraction_detailed"),
        (EXTRACTION_STRUCTURED, "extraction_structured"),
        (ANNOTATION_STRUCTURED_JSON, "annotation_structured_json"),
        (ANNOTATION_YES_NO, "annotation_yes_no"),
        (ANNOTATION_YES_NO_SMOLVLM, "annotation_yes_no_smolvlm"),
        (ANNOTATION_MOLMO, "annotation_molmo"),
        (ANNOTATION_LLAVA, "annotation_llava"),
        (ANNOTATION_BLIP, "annotation_blip"),
    ] {
        assert_eq!(format!("{text}\n"), golden(&format!("templates/{file}.txt")), "{file}");
    }
}

#[test]
fn rendered_extraction_prompts() {
    assert_eq!(
        render_extraction(ExtractionPrompt::StructuredAnalyzer, "zebra") + "\n",
        golden("rendered/extraction_structured_zebra.txt")
    );
    assert_eq!(
        render_extraction(ExtractionPrompt::DetailedInventory, "ice_cream_cone") + "\n",
        golden("rendered/extraction_detailed_ice_cream_cone.txt")
    );
}

#[test]
fn rendered_annotation_prompts() {
    let zebra = elements("zebra", &["head", "stripes", "tail"]);
    assert_eq!(
        render_structured_annotation("zebra", &zebra) + "\n",
        golden("rendered/annotation_structured_json_zebra.txt")
    );
    assert_eq!(
        render_molmo("zebra", "zebra_0001.png", &zebra) + "\n",
        golden("rendered/annotation_molmo_zebra.txt")
    );
    let cone = elements("ice_cream_cone", &["waffle_pattern"]);
    assert_eq!(
        render_yes_no(YesNoTemplate::Standard, "ice_cream_cone", &cone[0]) + "\n",
        golden("rendered/annotation_yes_no_ice_cream_cone.txt")
    );
    for (template, file) in [
        (YesNoTemplate::SmolVlm, "annotation_yes_no_smolvlm_zebra"),
        (YesNoTemplate::Llava, "annotation_llava_zebra"),
        (YesNoTemplate::Blip, "annotation_blip_zebra"),
    ] {
        assert_eq!(
            render_yes_no(template, "zebra", &zebra[1]) + "\n",
            golden(&format!("rendered/{file}.txt")),
            "{file}"
        );
    }
}
