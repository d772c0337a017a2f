//! Class prompts, hashed text embeddings and nearest-label lookup.

use evsynth::conditioning::{cosine_similarity, embed_text, format_class_prompt, nearest_label, Condition};

fn main() -> evsynth::Result<()> {
    let labels: Vec<String> = ["goldfish", "great white shark", "tiger shark", "airliner", "school bus"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    println!("prompt: {:?}", format_class_prompt(&labels[1])?);
    let a = embed_text("A photo of great white shark", 64)?;
    let b = embed_text("A photo of tiger shark", 64)?;
    let c = embed_text("A photo of airliner", 64)?;
    println!("cos(great white shark, tiger shark) = {:.3}", cosine_similarity(&a, &b));
    println!("cos(great white shark, airliner)    = {:.3}", cosine_similarity(&a, &c));
    for query in ["shark", "a yellow school bus", "zebra"] {
        let (label, score) = nearest_label(query, &labels)?;
        println!("{query:>20} -> {label} ({score:.3})");
    }
    let cond = Condition::class_text("tiger shark", 16)?;
    println!("condition embedding norm {:.3}", cond.embedding().unwrap_or(&[]).iter().map(|v| v * v).sum::<f64>().sqrt());
    Ok(())
}
