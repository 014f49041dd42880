"""Walkthrough: prompt templates and BLEU scoring of candidate captions.

Renders the built-in templates for a couple of labels, then scores two
hypothetical captions against a reference explanation to show how prompt
choice is compared via sentence-level BLEU.
"""

from vale import PromptRegistry, bleu, evaluate_prompts, render, tokenize
from vale.bleu import format_prompt_table
from vale.fixtures import reference_texts

registry = PromptRegistry()
print("built-in templates:")
for template in registry.list():
    print(f"  {template.id}: {template.text}")

print("\nrendered for label 'bald_eagle':")
print(" ", render(registry.get("default-imagenet"), "bald_eagle").rendered)
print("rendered for label 'Airplane':")
print(" ", render(registry.get("sonar-custom"), "Airplane").rendered)

reference = reference_texts()[0]
good = ("The segmented object is a bald eagle with pale head and tail "
        "feathers and dark brown plumage, wings held out broad as if "
        "mid-glide.")
vague = "There is a bird in this picture."

for name, candidate in (("label-conditioned", good), ("bare", vague)):
    report = bleu(tokenize(candidate), [tokenize(reference["text"])])
    print(f"\n{name} caption -> BLEU {report.score:.4f} "
          f"(precisions {[round(p, 3) for p in report.precisions]}, "
          f"brevity {report.brevity_penalty:.3f})")

rows, errors = evaluate_prompts(
    [("default-imagenet", good, reference["id"]),
     ("bare", vague, reference["id"])],
    {reference["id"]: reference})
print("\n" + format_prompt_table(rows, errors))
