import numpy as np
import pytest
import torch
from torch import nn

from network.checkpoint import load_checkpoint, save_checkpoint
from network.heads import GAPTHead, flip_classes, gap_head, gapt_head
from network.layers import (
    LEAKY_SLOPE,
    AttentionAugmentedConv,
    PeriodicConv,
    WideResBlock,
    conv3d_periodic,
    conv_periodic,
    kaiming_init,
)
from network.model import FULL_SIZE_CHANNELS, NetworkSpec, build_decoder_network
from network.training import TrainConfig
from qec.code import build_toric
from qec.container import ContainerFormatError
from qec.equivariance import all_translations, flip_functional, translate_checks
from qec.noise import NoiseModel, extract_syndromes, label_indices, sample_errors, stream


def _roll(x: torch.Tensor, shift: tuple[int, ...]) -> torch.Tensor:
    return torch.roll(x, shifts=shift, dims=tuple(range(2, 2 + len(shift))))


# ── convolutions ──────────────────────────────────────────────────────────────

def test_identity_kernel():
    x = torch.randn(2, 3, 4, 4, 4)
    weight = torch.eye(3).view(3, 3, 1, 1, 1)
    assert torch.equal(conv3d_periodic(x, weight), x)


def test_conv_is_translation_equivariant():
    torch.manual_seed(0)
    x = torch.randn(2, 4, 5, 5, 5)
    weight = torch.randn(6, 4, 3, 3, 3)
    bias = torch.randn(6)
    shift = (1, 3, 2)
    diff = conv_periodic(_roll(x, shift), weight, bias) - _roll(conv_periodic(x, weight, bias), shift)
    assert diff.abs().max() < 1e-5


def test_conv_shape_errors():
    with pytest.raises(ValueError):
        conv_periodic(torch.randn(1, 2, 4, 4, 4), torch.randn(3, 2, 2, 2, 2))
    with pytest.raises(ValueError):
        conv_periodic(torch.randn(1, 3, 4, 4, 4), torch.randn(3, 2, 3, 3, 3))
    with pytest.raises(ValueError):
        conv3d_periodic(torch.randn(1, 2, 4, 4), torch.randn(3, 2, 3, 3))


def test_conv_gradcheck():
    torch.manual_seed(1)
    x = torch.randn(2, 2, 3, 3, 3, dtype=torch.float64, requires_grad=True)
    weight = torch.randn(3, 2, 3, 3, 3, dtype=torch.float64, requires_grad=True)
    bias = torch.randn(3, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(conv_periodic, (x, weight, bias), eps=1e-6, atol=1e-5, rtol=1e-3)


def test_wide_res_block_gradcheck():
    torch.manual_seed(2)
    block = WideResBlock(4, 4, depth=3, kernel_size=3, dim=3).double()
    x = torch.randn(2, 4, 3, 3, 3, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(block, (x,), eps=1e-6, atol=1e-5, rtol=1e-3)


def test_attention_conv_gradcheck_and_equivariance():
    torch.manual_seed(3)
    layer = AttentionAugmentedConv(4, 8, kernel_size=3, dim=2).double()
    x = torch.randn(2, 4, 3, 3, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(layer, (x,), eps=1e-6, atol=1e-5, rtol=1e-3)
    with torch.no_grad():
        diff = layer(_roll(x, (1, 2))) - _roll(layer(x), (1, 2))
    assert diff.abs().max() < 1e-10


def test_zero_conv_path_leaves_projection():
    block = WideResBlock(4, 6, depth=2, dim=3).eval()
    for module in block.stages:
        if isinstance(module, PeriodicConv):
            nn.init.zeros_(module.weight)
            nn.init.zeros_(module.bias)
    x = torch.randn(2, 4, 3, 3, 3)
    with torch.no_grad():
        assert torch.allclose(block(x), block.projection(x))


def test_batch_norm_with_unit_statistics_is_identity():
    bn = nn.BatchNorm3d(4, momentum=0.1).eval()
    x = torch.randn(2, 4, 3, 3, 3)
    with torch.no_grad():
        assert torch.allclose(bn(x), x, atol=1e-4)


def test_kaiming_statistics():
    weight = kaiming_init((1000, 100), generator=torch.Generator().manual_seed(0))
    target = 2.0 / ((1 + LEAKY_SLOPE**2) * 100)
    assert abs(weight.var().item() - target) / target < 0.05
    assert abs(weight.mean().item()) < 4 * np.sqrt(target / weight.numel())


def test_kaiming_is_seeded():
    a = kaiming_init((8, 4, 3, 3, 3), generator=torch.Generator().manual_seed(5))
    b = kaiming_init((8, 4, 3, 3, 3), generator=torch.Generator().manual_seed(5))
    assert torch.equal(a, b)


# ── pooling heads ─────────────────────────────────────────────────────────────

def test_gap_head_averages():
    dist = torch.softmax(torch.randn(1, 64), dim=-1)
    probs = dist.expand(3, 27, 64)
    assert torch.allclose(gap_head(probs), dist.expand(3, 64))
    pooled = gap_head(torch.softmax(torch.randn(3, 27, 64), dim=-1))
    assert torch.allclose(pooled.sum(dim=1), torch.ones(3))
    uniform = torch.full((2, 27, 64), 1 / 64)
    assert torch.allclose(gap_head(uniform), torch.full((2, 64), 1 / 64))


def test_flip_classes_is_xor_permutation():
    probs = torch.arange(16, dtype=torch.float32).view(1, 1, 16)
    out = flip_classes(probs, torch.tensor([[5]]))
    assert out[0, 0].tolist() == [float(l ^ 5) for l in range(16)]


def test_gapt_matches_gap_on_empty_syndrome(code3):
    head = GAPTHead(code3)
    probs = torch.softmax(torch.randn(4, 27, 64), dim=-1)
    zero = torch.zeros(4, code3.n_checks)
    assert torch.equal(head(probs, zero), gap_head(probs))


def test_gapt_pools_consistent_one_hots_to_one_hot(code3):
    head = GAPTHead(code3)
    errors = sample_errors(code3, NoiseModel(0.2), stream(0, 0), 2)
    syndromes = torch.from_numpy(extract_syndromes(code3, errors).astype(np.float32))
    masks = head.position_masks(syndromes)
    label = 42
    probs = torch.nn.functional.one_hot(label ^ masks, 64).float()
    pooled = head(probs, syndromes)
    assert torch.allclose(pooled, torch.nn.functional.one_hot(torch.tensor([label, label]), 64).float())


def test_gapt_head_rejects_wrong_lattice(code3):
    with pytest.raises(ValueError):
        GAPTHead(code3)(torch.full((1, 8, 64), 1 / 64), torch.zeros(1, code3.n_checks))


def test_gapt_head_gradcheck_through_softmax(code2):
    head = GAPTHead(code2).double()
    errors = sample_errors(code2, NoiseModel(0.2), stream(3, 0), 2)
    syndromes = torch.from_numpy(extract_syndromes(code2, errors).astype(np.float64))
    torch.manual_seed(4)
    logits = torch.randn(2, head.n_positions, 64, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(
        lambda z: head(torch.softmax(z, dim=-1), syndromes), (logits,), eps=1e-6, atol=1e-5, rtol=1e-3
    )
    probs = torch.softmax(torch.randn(2, head.n_positions, 64, dtype=torch.float64), dim=-1).requires_grad_()
    masks = head.position_masks(syndromes)
    assert torch.autograd.gradcheck(lambda q: gapt_head(q, masks), (probs,), eps=1e-6, atol=1e-5, rtol=1e-3)


# ── full decoder ──────────────────────────────────────────────────────────────

def _random_syndromes_and_shifts(code, n, seed):
    errors = sample_errors(code, NoiseModel(0.1), stream(seed, 0), n)
    syndromes = extract_syndromes(code, errors)
    rng = np.random.default_rng(seed)
    group = all_translations(code.L, code.dim)
    return syndromes, [group[int(i)] for i in rng.integers(len(group), size=n)]


@pytest.mark.parametrize("L,dim", [(3, 3), (3, 2)])
def test_gapt_decoder_is_flip_equivariant(L, dim):
    code = build_toric(L, dim)
    model = build_decoder_network(code, NetworkSpec(dim=dim, head="gapt"), seed=0).eval()
    functional = flip_functional(code)
    syndromes, shifts = _random_syndromes_and_shifts(code, 100, seed=1)
    moved = np.stack([translate_checks(g, s) for g, s in zip(shifts, syndromes)])
    deltas = np.array([label_indices(functional.delta(g, s[None]))[0] for g, s in zip(shifts, syndromes)])

    with torch.no_grad():
        base = model(torch.from_numpy(syndromes.astype(np.float32))).numpy()
        shifted = model(torch.from_numpy(moved.astype(np.float32))).numpy()
    classes = np.arange(code.n_classes)
    expected = np.stack([base[i, classes ^ deltas[i]] for i in range(len(base))])
    assert np.abs(shifted - expected).max() < 1e-5


def test_gap_decoder_is_translation_invariant(code3):
    model = build_decoder_network(code3, NetworkSpec(head="gap"), seed=0).eval()
    syndromes, shifts = _random_syndromes_and_shifts(code3, 100, seed=2)
    moved = np.stack([translate_checks(g, s) for g, s in zip(shifts, syndromes)])
    with torch.no_grad():
        base = model(torch.from_numpy(syndromes.astype(np.float32)))
        shifted = model(torch.from_numpy(moved.astype(np.float32)))
    assert (shifted - base).abs().max() < 1e-5


def test_position_softmax_sums_to_one(code2):
    model = build_decoder_network(code2, seed=0).eval()
    with torch.no_grad():
        probs = model.position_probabilities(torch.zeros(3, code2.n_checks))
    assert probs.shape == (3, 8, 64)
    assert (probs.sum(dim=-1) - 1).abs().max() < 1e-6


def test_network_build_is_seeded(code2):
    a = build_decoder_network(code2, seed=4)
    b = build_decoder_network(code2, seed=4)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_network_transfers_to_other_lattice(code3):
    model = build_decoder_network(code3, seed=0).eval()
    bigger = model.with_code(build_toric(4, 3))
    with torch.no_grad():
        out = bigger(torch.zeros(2, 4 * 4**3))
    assert out.shape == (2, 64)
    assert bigger.net is model.net


def test_attention_network_runs(code2d):
    model = build_decoder_network(code2d, NetworkSpec(dim=2, attention=True), seed=0).eval()
    with torch.no_grad():
        out = model(torch.zeros(2, code2d.n_checks))
    assert out.shape == (2, 16)


def test_network_spec_validation():
    assert NetworkSpec(channels=FULL_SIZE_CHANNELS).channels == (128, 64, 64)
    with pytest.raises(ValueError):
        NetworkSpec(kernel_size=4)
    with pytest.raises(ValueError):
        NetworkSpec(channels=(32, 0))


# ── checkpoints ───────────────────────────────────────────────────────────────

def test_checkpoint_round_trip(tmp_path, code2):
    model = build_decoder_network(code2, NetworkSpec(head="gapt"), seed=3).eval()
    path = save_checkpoint(tmp_path / "net.nqd", model, TrainConfig(batch_size=8, total_samples=16), 0.02)
    loaded, meta = load_checkpoint(path)
    assert meta["L"] == 2 and meta["p_train"] == 0.02
    assert meta["spec"]["head"] == "gapt"
    x = torch.from_numpy(extract_syndromes(code2, sample_errors(code2, NoiseModel(0.1), stream(0, 0), 5))
                         .astype(np.float32))
    with torch.no_grad():
        assert torch.equal(loaded(x), model(x))
    buffers = dict(loaded.net.named_buffers())
    assert all(
        buffers[name].shape == buffer.shape for name, buffer in model.net.named_buffers()
    )
    assert any(buffer.ndim == 0 for buffer in buffers.values())

    moved, _ = load_checkpoint(path, build_toric(3, 3))
    assert moved.code.L == 3


def test_checkpoint_rejects_code_file(tmp_path, code2):
    from qec.container import write_code

    path = write_code(tmp_path / "code.nqd", code2)
    with pytest.raises(ContainerFormatError):
        load_checkpoint(path)
