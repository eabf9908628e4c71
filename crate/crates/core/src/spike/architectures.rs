//! Reference configurations of the five spiking architectures. Only the
//! recurrent variant is trainable here; the rest are descriptive.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchitectureSpec {
    pub name: &'static str,
    pub tau_m: f64,
    pub v_th: f64,
    pub encoder: &'static str,
    pub decoder: &'static str,
    pub trainable: bool,
}

const SHARED_DECODER: &str =
    "type embedding concatenated with hidden state; Linear(type+hidden -> hidden); seven linear feature heads";

pub const ARCHITECTURES: [ArchitectureSpec; 6] = [
    ArchitectureSpec {
        name: "S-Transformer",
        tau_m: 2.0,
        v_th: 0.6,
        encoder: "Linear(128->256) + LIF + feature embedding; 12 layers, 8 heads, FFN 1024; LIF after Q/K/V and FFN; LayerNorm after LIF",
        decoder: SHARED_DECODER,
        trainable: false,
    },
    ArchitectureSpec {
        name: "S-LSTM",
        tau_m: 2.0,
        v_th: 0.6,
        encoder: "Linear(128->1024) + LIF + feature embedding; 1-layer LSTM (hidden 256); LIF on outputs",
        decoder: SHARED_DECODER,
        trainable: false,
    },
    ArchitectureSpec {
        name: "S-RNN",
        tau_m: 2.0,
        v_th: 0.6,
        encoder: "Linear(128->256) + LIF + feature embedding; single-layer recurrent unit (hidden 256); LIF on outputs",
        decoder: SHARED_DECODER,
        trainable: true,
    },
    ArchitectureSpec {
        name: "S-CNN",
        tau_m: 2.0,
        v_th: 0.5,
        encoder: "Linear(128->256) + LIF + feature embedding; Conv1D(128->256) + LIF",
        decoder: SHARED_DECODER,
        trainable: false,
    },
    ArchitectureSpec {
        name: "S-GAN generator",
        tau_m: 2.0,
        v_th: 0.5,
        encoder: "Linear(128->256) + LIF + feature embedding; Conv1D(128->256) + LIF",
        decoder: SHARED_DECODER,
        trainable: false,
    },
    ArchitectureSpec {
        name: "S-GAN discriminator",
        tau_m: 2.0,
        v_th: 0.5,
        encoder: "Conv1D (2 layers) + LIF; Linear(512->1)",
        decoder: "none",
        trainable: false,
    },
];

pub fn architecture(name: &str) -> Option<&'static ArchitectureSpec> {
    ARCHITECTURES.iter().find(|a| a.name.eq_ignore_ascii_case(name))
}
