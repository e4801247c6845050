"""Bundled 20-disease demo catalog.

Five departments of four diseases each.  Within a department all four
share one common symptom, each fixed pair of diseases shares three more,
and every disease keeps one dominant symptom that appears in no other
profile.  A shared symptom carries the same weight in every profile
listing it, so partial evidence produces exact ties between the diseases
it cannot separate; only the dominant symptoms (or their denial) break
those ties.  That is what gives the benchmark its shape: openings built
from shared symptoms leave two or four live candidates, and the dialogue
asks its way to the dominants.
"""

from __future__ import annotations

from .knowledge import DiseaseDB, DiseaseRecord

_WEIGHTS = {"dominant": 0.85, "common": 0.85, "pair": (0.8, 0.7, 0.6)}

# department -> (common symptom, [(pair symptoms), [(id, name, dominant,
# overview, treatment), ...] as two fixed pairs])
_GROUPS = [
    ("respiratory", "cough", [
        (("runny nose", "sore throat", "watery eyes"), [
            ("influenza", "Influenza", "sudden chills",
             "Acute viral infection with abrupt fever, chills, and body aches.",
             "Rest, fluids, and antivirals when started early."),
            ("common-cold", "Common cold", "sneezing fits",
             "Mild viral infection of the nose and throat.",
             "Symptomatic care: rest, fluids, and decongestants."),
        ]),
        (("shortness of breath", "chest congestion", "chest pain"), [
            ("pneumonia", "Pneumonia", "rusty sputum",
             "Infection of the lung tissue producing sputum and breathing trouble.",
             "Antibiotics guided by severity; oxygen support when needed."),
            ("bronchitis", "Acute bronchitis", "wheezing",
             "Inflammation of the bronchial tubes, usually after a viral infection.",
             "Supportive care; bronchodilators if wheezing is prominent."),
        ]),
    ]),
    ("gastroenterology", "abdominal pain", [
        (("nausea", "bloating", "belching"), [
            ("gastritis", "Gastritis", "stomach burning",
             "Irritation of the stomach lining causing burning upper abdominal pain.",
             "Acid suppression and removal of irritants such as NSAIDs or alcohol."),
            ("peptic-ulcer", "Peptic ulcer", "black stools",
             "Open sore in the stomach or duodenal lining, often H. pylori related.",
             "Proton pump inhibitors plus eradication therapy when H. pylori is found."),
        ]),
        (("vomiting", "low fever", "loss of appetite"), [
            ("appendicitis", "Appendicitis", "right side tenderness",
             "Inflamed appendix with pain settling into the right lower abdomen.",
             "Urgent surgical evaluation; appendectomy is the standard of care."),
            ("gastroenteritis", "Gastroenteritis", "watery diarrhea",
             "Stomach flu: short-lived infection with diarrhea and cramping.",
             "Oral rehydration; most episodes settle without antibiotics."),
        ]),
    ]),
    ("neurology", "headache", [
        (("neck stiffness", "light sensitivity", "trouble focusing"), [
            ("migraine", "Migraine", "visual aura",
             "Recurrent one-sided throbbing headaches, often heralded by an aura.",
             "Triptans for attacks; trigger control and preventives for frequency."),
            ("tension-headache", "Tension headache", "band like pressure",
             "Band-like pressure headache tied to stress and muscle strain.",
             "Simple analgesics, posture work, and stress management."),
        ]),
        (("dizziness", "queasiness", "poor sleep"), [
            ("sinusitis", "Sinusitis", "thick nasal discharge",
             "Blocked, infected sinuses causing facial pressure and congestion.",
             "Saline rinses and decongestants; antibiotics for persistent cases."),
            ("concussion", "Concussion", "recent head blow",
             "Mild traumatic brain injury following a blow to the head.",
             "Physical and cognitive rest with graded return to activity."),
        ]),
    ]),
    ("dermatology", "rash", [
        (("itching", "skin flaking", "cracked skin"), [
            ("eczema", "Eczema", "weeping patches",
             "Chronic dry, itchy, inflamed skin, typically in flexural creases.",
             "Emollients and topical steroids during flares."),
            ("psoriasis", "Psoriasis", "silvery plaques",
             "Autoimmune plaques with silvery scale on extensor surfaces.",
             "Topical therapy first; phototherapy or systemics for wider disease."),
        ]),
        (("skin redness", "burning skin", "sudden flare"), [
            ("contact-dermatitis", "Contact dermatitis", "blisters after contact",
             "Skin reaction where an irritant or allergen touched the skin.",
             "Avoid the trigger; topical steroids calm the reaction."),
            ("hives", "Hives", "raised welts",
             "Sudden crops of raised, itchy welts from histamine release.",
             "Antihistamines; investigate triggers if episodes recur."),
        ]),
    ]),
    ("urology", "frequent urination", [
        (("burning urination", "urgency", "cloudy urine"), [
            ("bladder-infection", "Bladder infection", "pelvic pressure",
             "Bacterial cystitis with burning, urgent, frequent urination.",
             "A short antibiotic course and plenty of fluids."),
            ("kidney-infection", "Kidney infection", "flank pain",
             "Ascending urinary infection reaching the kidney, with flank pain.",
             "Prompt antibiotics; hospital care if systemically unwell."),
        ]),
        (("nighttime urination", "interrupted sleep", "constant tiredness"), [
            ("diabetes", "Type 2 diabetes", "excessive thirst",
             "High blood sugar producing thirst and frequent urination.",
             "Lifestyle change plus metformin; monitor glucose and complications."),
            ("overactive-bladder", "Overactive bladder", "urge incontinence",
             "Urge incontinence from involuntary bladder muscle contractions.",
             "Bladder training and antimuscarinic medication."),
        ]),
    ]),
]


def demo_disease_db() -> DiseaseDB:
    """Build the bundled demo catalog."""
    records = []
    for department, common, pairs in _GROUPS:
        for pair_symptoms, members in pairs:
            for disease_id, name, dominant, overview, treatment in members:
                profile = [(dominant, _WEIGHTS["dominant"]), (common, _WEIGHTS["common"])]
                profile.extend(zip(pair_symptoms, _WEIGHTS["pair"]))
                records.append(DiseaseRecord(
                    id=disease_id, name=name, department=department,
                    overview=overview, treatment=treatment,
                    symptom_profile=tuple(profile),
                ))
    return DiseaseDB(tuple(records))
