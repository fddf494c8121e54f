"""End-to-end shape pipeline: corpus -> PCA model -> weight morph -> volume check.

Run with: python3 demos/morph_pipeline.py
"""
from __future__ import annotations

import numpy as np

from bodymod.shapemodel import (
    AnthroVector,
    generate_synthetic_corpus,
    mesh_volume,
    synthetic_subject,
    train_shape_model,
    weight_from_volume,
)

corpus = generate_synthetic_corpus(subject_count=8, seed=11, rings=32, segments=32)
print(f"corpus: {corpus.size} subjects, {corpus.meshes[0].vertices.shape[0]} vertices each")

model = train_shape_model(corpus)
print(f"model: k={model.component_count} components, "
      f"{len(model.face_region)} face vertices held fixed")

# A held-out subject the model has never seen.
anthro = AnthroVector(weight=74.0, height=1.78, armspan=1.84, inseam=0.82)
subject, _ = synthetic_subject(anthro, rings=32, segments=32)
base_volume = mesh_volume(subject)
print(f"\nheld-out subject: {anthro.weight} kg, enclosed volume {base_volume:.4f} m^3")

# Morph through a weight sweep and read the weight back from enclosed volume.
print("\n  d_kg   volume-derived weight   face max shift")
for d in (-10.0, -5.0, 0.0, 5.0, 10.0):
    morphed = model.modify_weight(subject, d)
    recovered = weight_from_volume(morphed, subject, anthro.weight)
    face = model.face_region.indices
    face_shift = np.abs(morphed.vertices[face] - subject.vertices[face]).max()
    print(f"  {d:+5.1f}   {recovered:10.3f} kg          {face_shift:.2e} m")
