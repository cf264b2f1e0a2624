//! Prompt templates and their rendering.
//!
//! Templates are kept verbatim; rendering is plain slot substitution so that
//! literal braces in the JSON examples survive untouched. Natural-language
//! slots get underscores replaced by spaces, identifier slots do not.

use sea_core::dataset::Element;

use crate::config::{ExtractionPrompt, YesNoTemplate};

/// Leading image placeholder line of [`ANNOTATION_STRUCTURED_JSON`]. Chat
/// transports send the image as its own message part, so rendering drops it.
pub const IMAGE_TOKEN_LINE: &str = "<|image|>\n";

/// System message for caption generation during sketch validation.
pub const CAPTION_SYSTEM: &str = r#"You are a helpful assistant for generating image captions."#;

/// User message for caption generation. `{{text1}}` is literal text, not a slot.
pub const CAPTION_USER: &str = r#"Please describe this image 5 times based on the following format.
The input image is provided as a base64-encoded JPEG string.

Output template
"A black line drawing of {{text1}} on a white background."
OR
"A simple drawing of {{text1}} on a white background."

Instructions
- Replace {{text1}} with a detailed description of the image.
- Avoid vague descriptions; focus on clear details such as objects, shapes, and actions.
- The fourth and fifth descriptions must focus on unexplained details in the other descriptions, except for the main object.
- Do not include "{{}}" in the final output.
- Choose the appropriate template based on the complexity of the image.
- Separate each description with \n\n.
- Do not put any numbers or symbols in front of the descriptions.
- Do not use commas (",")."#;

/// Detailed element inventory (id, shape, position, count, importance, ...). Slot: `{class_name}`.
pub const EXTRACTION_DETAILED: &str = r#"You are a sketch analysis expert. Your task is to extract a structured list of common visual elements that are typically included — or semantically expected — when humans sketch a given object class.

Use the object class name, along with general visual common sense and knowledge of object structure, to infer as many relevant visual components as possible.

Your goal is to produce a comprehensive and fine-grained breakdown of visual parts, including:
- core parts,
- minor or optional parts,
- functional attachments,
- repeated units,
- motion-related components (e.g., rotating blades, walking legs),
- relevant environmental or contextual elements.

Even if a part is rarely drawn, include it if it is semantically meaningful or distinctive for understanding or sketching the object, and assign lower importance_score accordingly.

This output will be used to build a commonsense database for sketch abstraction, so prioritize coverage and interpretability.

For each visual element, return the following fields:
- id: in the form <class>.<element_name>
- name: the name of the part
- shape: geometric form (e.g., circle, triangle, curve)
- position: typical relative location in the object
- count: usual number (e.g., 1, 2, or "varies")
- importance_score: integer from 1 to 5 (5 = essential; 1 = optional or rare)
- optional: true or false
- description: what it looks like and why it is relevant

Return the result strictly in the following structure:
{
    "class": "{class_name}",
    "total_elements": <number_of_elements>,
    "elements": [
        ...
    ]
}

Important general rules:
- Do not include color information.
- Do not include fictional or humorous features.
- Do not include decorative elements unless they are functionally or culturally tied to the class.
- Use consistent, interpretable IDs in the format <class>.<element_name>.
- Include both (1) frequently drawn elements and (2) structurally important elements even if rarely drawn.
- Include context or environment features only if they are logically essential to how the object is typically depicted.
- Think about what makes this class visually different from nearby classes and reflect that in part selection.
- Favor over-inclusion: include more elements with appropriately scaled importance_score.

Class: {class_name}"#;

/// Compact snake_case element list. Slot: `{word}`.
pub const EXTRACTION_STRUCTURED: &str = r#"You are a Structured Visual Object Analyzer for sketches.
Your job is to output a single JSON object describing the visible parts of a sketched object class.

Hard rules (follow strictly):
1. No environment-only items.
Do not include background or scene items that are not intrinsic parts of the object (e.g., no clouds for sun, no road or buildings for car).

2. Visible-only.
Include only parts plausibly visible in a typical sketch; exclude hidden internals (e.g., car engine, phone mainboard).

3. Variants allowed, naming rules apply.
Common sketch variants replacing or decorating real parts may be included with "optional": true (e.g., human_mouth on an insect).
Do not use the word "stylized"; do not use parentheses or brackets.
All names must be in snake_case (lowercase, digits allowed, words separated by a single underscore).
Examples: steam_lines, wing_vein_lines, tail_fan, human_mouth.

4. Expressive lines/effects.
Expressive effects (e.g., airflow_lines, motion_lines, steam_lines, sparkle) are excluded by default.
They may be included only when they represent an essential and commonly used feature of the object’s sketch and must then be marked "optional": true.
Background-only elements (ground, sky, clouds, water, etc.) must still be excluded.

5. Merge symmetric or duplicated parts.
Merge symmetric repeats (e.g., left/right wheels, pairs of legs) into a single element (e.g., wheels, legs).

6. Coverage and granularity.
Produce a rich but concise set of features (recommended 9-16 elements).
Prefer coarse-to-mid granularity: split obvious appendages or facial parts (head, arms, legs) instead of using a single body.
Consider including elements from:
(a) anatomy or core shape,
(b) facial features,
(c) iconic clothing or accessories,
(d) explicit surface, texture, or pattern marks (e.g., seed_dots, peel_lines, feather_lines, shell_pattern, fur_lines),
(e) expressive lines only if visibly drawn.

7. Ground truth first, then variants.
List physically correct parts first, then common variants or expressive features with "optional": true.

8. Labelability and non-ambiguous features.
Every feature must be binary labelable (0/1) from the sketch without subjective judgment.
Disallow vague descriptors (e.g., smooth_surface, shiny_surface).
Do not describe the absence of texture (e.g., no_texture).
Prefer positive, observable evidence (lines, dots, edges, explicit patterns), such as glaze_lines, seed_dots, crack_lines, slice_lines.

Output format (exact structure):
{
    "class": "<object_name>",
    "total_elements": <int>,
    "elements": [
        {
            "id": "<class_name>.<part_name>",
            "name": "<part_name>",
            "optional": <true or false>
        },
        ...
    ]
}

Additional guidance:
- "total_elements" must equal the number of objects in "elements".
- Output JSON only (no commentary outside the JSON).
- <part_name> must be snake_case; IDs must be of the form <class_name>.<part_name>.
- Ensure at least 8 elements (prefer 9-16) and reasonable coverage of anatomy, facial features, accessories, surface or pattern, and expressive lines.
- Ensure all features are 0/1 labelable and not environment-only.

Final instruction: Now, provide the structured JSON for the following object: {word}."#;

/// Boolean JSON over the full element list. Slots: `{class_name}`, `{element_block}`.
pub const ANNOTATION_STRUCTURED_JSON: &str = r#"<|image|>
You are a strict vision auditor for sketched objects.
Target class: "{class_name}".
Valid elements for this class (use only these ids; do not add new keys):
{element_block}
Task: For each element id above, return only whether the element is depicted (true/false).
Do not return counts. If ambiguous, use false.
Return only a compact JSON object with element ids as keys and boolean values (true/false).
No prose, no code block, no extra keys.
Example schema (structure only):
{
    "element_id_1": true,
    "element_id_2": false,
    ...
}"#;

/// One question per element. Slots: `{class_name}`, `{e}`.
pub const ANNOTATION_YES_NO: &str = r#"In this {class_name} image, does this sketch contain a {e}?
Answer exactly "yes" or "no"."#;

/// The yes/no question wrapped in a chat template.
pub const ANNOTATION_YES_NO_SMOLVLM: &str = r#"<|user|>
<image>
In this {class_name} image, does this sketch contain a {e}? Answer exactly 'yes' or 'no'.
<|end|>
<|assistant|>"#;

/// 0/1 JSON keyed by file name. Slots: `{category}`, `{element_list}`, `{file_name}`, `{element_lines}`.
pub const ANNOTATION_MOLMO: &str = r#"You are an assistant that analyzes an image of a {category} and answers in JSON format only.

Task: For the given {category} image, decide if each of the following elements is present (1) or not present (0):
[{element_list}].

Return the result strictly as a JSON object in the following format:
{
    "{file_name}": {
        {element_lines}
    }
}
Do not include explanations or extra text. Output only valid JSON."#;

/// Slots: `{category}`, `{element}`.
pub const ANNOTATION_LLAVA: &str = r#"In this {category} image, is there a {element}?
Answer Yes or No."#;

/// Slots: `{category}`, `{element}`.
pub const ANNOTATION_BLIP: &str = r#"In this {category} image, is there a {element}?"#;

fn spoken(s: &str) -> String {
    s.replace('_', " ")
}

pub fn render_extraction(style: ExtractionPrompt, class_name: &str) -> String {
    match style {
        ExtractionPrompt::DetailedInventory => EXTRACTION_DETAILED.replace("{class_name}", class_name),
        ExtractionPrompt::StructuredAnalyzer => EXTRACTION_STRUCTURED.replace("{word}", class_name),
    }
}

/// Element ids, one per line, each prefixed with `- `.
pub fn element_block(elements: &[Element]) -> String {
    elements.iter().map(|e| format!("- {}", e.id)).collect::<Vec<_>>().join("\n")
}

/// The structured-JSON annotation prompt without the image placeholder line.
pub fn render_structured_annotation(class_name: &str, elements: &[Element]) -> String {
    ANNOTATION_STRUCTURED_JSON
        .strip_prefix(IMAGE_TOKEN_LINE)
        .unwrap_or(ANNOTATION_STRUCTURED_JSON)
        .replace("{class_name}", class_name)
        .replace("{element_block}", &element_block(elements))
}

pub fn render_yes_no(template: YesNoTemplate, class_name: &str, element: &Element) -> String {
    let (class, part) = (spoken(class_name), spoken(&element.name));
    match template {
        YesNoTemplate::Standard => ANNOTATION_YES_NO.replace("{class_name}", &class).replace("{e}", &part),
        YesNoTemplate::SmolVlm => ANNOTATION_YES_NO_SMOLVLM.replace("{class_name}", &class).replace("{e}", &part),
        YesNoTemplate::Llava => ANNOTATION_LLAVA.replace("{category}", &class).replace("{element}", &part),
        YesNoTemplate::Blip => ANNOTATION_BLIP.replace("{category}", &class).replace("{element}", &part),
    }
}

/// Molmo prompt. `{element_list}` is the comma-separated element names and
/// `{element_lines}` one `"name": <0 or 1>` line per element.
pub fn render_molmo(class_name: &str, file_name: &str, elements: &[Element]) -> String {
    let list = elements.iter().map(|e| e.name.as_str()).collect::<Vec<_>>().join(", ");
    let lines = elements
        .iter()
        .map(|e| format!("\"{}\": <0 or 1>", e.name))
        .collect::<Vec<_>>()
        .join(",\n        ");
    ANNOTATION_MOLMO
        .replace("{category}", &spoken(class_name))
        .replace("{element_list}", &list)
        .replace("{file_name}", file_name)
        .replace("{element_lines}", &lines)
}

/// System and user messages for caption generation.
pub fn caption_messages() -> (&'static str, &'static str) {
    (CAPTION_SYSTEM, CAPTION_USER)
}
