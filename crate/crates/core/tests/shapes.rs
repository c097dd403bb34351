use tfn_core::nn::{assemble_model, Backbone, ModelMode, TfConvConfig};
use tfn_core::{KernelFamily, Model, Tensor};

fn paper_ledger(n_m: usize, n_p: usize) -> Vec<(&'static str, (usize, usize))> {
    vec![
        ("tfconv", (n_m, 1024)),
        ("conv1d", (16, 1010)),
        ("batchnorm1d", (16, 1010)),
        ("relu", (16, 1010)),
        ("conv1d", (32, 1008)),
        ("batchnorm1d", (32, 1008)),
        ("relu", (32, 1008)),
        ("maxpool", (32, 504)),
        ("conv1d", (64, 502)),
        ("batchnorm1d", (64, 502)),
        ("relu", (64, 502)),
        ("conv1d", (128, 500)),
        ("batchnorm1d", (128, 500)),
        ("relu", (128, 500)),
        ("adaptive_avgpool", (128, 4)),
        ("flatten", (512, 1)),
        ("dense", (512, 1)),
        ("relu", (512, 1)),
        ("dense", (256, 1)),
        ("relu", (256, 1)),
        ("dense", (64, 1)),
        ("relu", (64, 1)),
        ("dense", (n_p, 1)),
    ]
}

fn ledger(model: &Model) -> Vec<(&'static str, (usize, usize))> {
    let shapes = model.layer_shapes(1024).unwrap();
    model.layers.iter().map(|l| l.kind()).zip(shapes).collect()
}

/// Runs the layers one by one and records the actual tensor shapes.
fn forward_ledger(model: &mut Model, batch: usize) -> Vec<(usize, usize)> {
    let mut x = Tensor::zeros(batch, 1, 1024);
    let mut out = Vec::new();
    for layer in &mut model.layers {
        x = layer.forward(&x, false).unwrap();
        assert_eq!(x.batch, batch);
        out.push((x.channels, x.len));
    }
    out
}

#[test]
fn table_two_output_sizes() {
    for n_m in [8, 32] {
        let mut model =
            assemble_model(ModelMode::TfnAdd, Backbone::PaperCnn, TfConvConfig { family: KernelFamily::Sttf, channels: n_m }, 5, 0)
                .unwrap();
        let expected = paper_ledger(n_m, 5);
        assert_eq!(ledger(&model), expected, "n_m = {n_m}");
        let actual = forward_ledger(&mut model, 2);
        assert_eq!(actual, expected.iter().map(|e| e.1).collect::<Vec<_>>());
    }
}

#[test]
fn every_family_preserves_input_length() {
    for family in KernelFamily::INTERPRETABLE {
        let model = assemble_model(ModelMode::TfnAdd, Backbone::PaperCnn, TfConvConfig { family, channels: 8 }, 5, 0).unwrap();
        assert_eq!(model.layer_shapes(1024).unwrap()[0], (8, 1024), "{family}");
    }
}

#[test]
fn backbone_only_drops_the_first_row() {
    let model = assemble_model(ModelMode::BackboneOnly, Backbone::PaperCnn, TfConvConfig::default(), 5, 0).unwrap();
    assert_eq!(ledger(&model), paper_ledger(8, 5)[1..].to_vec());
}

#[test]
fn replace_mode_swaps_the_first_convolution() {
    for n_m in [8, 32] {
        let model =
            assemble_model(ModelMode::TfnReplace, Backbone::PaperCnn, TfConvConfig { family: KernelFamily::Sttf, channels: n_m }, 5, 0)
                .unwrap();
        let l = ledger(&model);
        assert_eq!(l[0], ("tfconv", (n_m, 1024)));
        assert_eq!(l[1], ("batchnorm1d", (n_m, 1024)));
        assert_eq!(l[3], ("conv1d", (32, 1022)));
        assert_eq!(l.last().unwrap().1, (5, 1));
    }
}

#[test]
fn alternate_backbones_end_in_class_logits() {
    for backbone in [Backbone::Lenet1d, Backbone::Resnet1d] {
        for mode in [ModelMode::BackboneOnly, ModelMode::TfnAdd] {
            let mut model = assemble_model(mode, backbone, TfConvConfig::default(), 5, 0).unwrap();
            let shapes = forward_ledger(&mut model, 2);
            assert_eq!(shapes, model.layer_shapes(1024).unwrap(), "{backbone} {mode}");
            assert_eq!(*shapes.last().unwrap(), (5, 1));
        }
    }
}
