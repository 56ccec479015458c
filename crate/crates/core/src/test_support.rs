//! Shared fixtures for unit tests.

use crate::synth::GeneratorSpec;

/// Two-type synthetic dataset carrying the default gating feature names,
/// trainable by the composite with small configs.
pub(crate) fn gate_demo_spec() -> GeneratorSpec {
    GeneratorSpec::from_toml_str(
        r#"
        [[features]]
        name = "C"
        role = "imine"
        [[features]]
        name = "SL"
        role = "imine"
        [[features]]
        name = "PG"
        role = "imine"
        [[features]]
        name = "H-X-Nu"
        role = "nucleophile"
        [[features]]
        name = "H-X-CNu"
        role = "nucleophile"
        [[features]]
        name = "Nu"
        role = "nucleophile"
        [[features]]
        name = "Polarizability"
        role = "nucleophile"
        [[features]]
        name = "cat_a"
        role = "catalyst"
        [[features]]
        name = "solv_a"
        role = "solvent"
        [[features]]
        name = "rv_a"
        role = "reaction_variable"

        [[types]]
        name = "alpha"
        count = 40
        features = [
            { center = 0.0, spread = 0.2, latent = "z" },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 0.5 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 1.0 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 1.0, latent = "z" },
        ]

        [[types]]
        name = "beta"
        count = 40
        features = [
            { center = 0.5, spread = 0.2, latent = "z" },
            { center = 0.2, spread = 0.1 },
            { center = 0.2, spread = 0.1 },
            { center = 0.2, spread = 0.1 },
            { center = 0.2, spread = 0.1 },
            { center = 0.0, spread = 0.5 },
            { center = 0.2, spread = 0.1 },
            { center = 1.0, spread = 1.0 },
            { center = 0.0, spread = 0.1 },
            { center = 0.0, spread = 1.0, latent = "z" },
        ]

        [target]
        intercept = 0.0
        weights = { cat_a = 2.0, rv_a = 1.5 }
        noise = 0.05
        [[target.pieces]]
        feature = "Nu"
        threshold = 0.0
        weights_below = { Nu = -3.0 }
        weights_above = { Nu = 3.0 }
        "#,
    )
    .unwrap()
}
