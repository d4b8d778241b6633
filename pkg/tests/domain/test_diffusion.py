"""Tests for the variance schedule, box normalization and DDIM updates."""

import math

import pytest
import torch

from fusedet.domain import Box3D, BoxNormalizer, DiffusionSchedule, NoisyBoxSet, OutOfRangeError
from fusedet.domain.services import (
    clamp_signal,
    corrupt,
    ddim_step,
    ddim_timesteps,
    denormalize,
    denormalize_boxes,
    implied_noise,
    make_schedule,
    normalize,
    normalize_boxes,
    pad_ground_truth,
    renew_boxes,
    sample_timestep,
)


class TestSchedule:
    """Tests for make_schedule and DiffusionSchedule."""

    def test_linear_first_step(self, linear_schedule):
        """Test that alpha_bar[0] = 1 - beta_0 for the linear schedule."""
        assert linear_schedule.alpha_bar_at(0) == pytest.approx(0.9999, abs=1e-12)

    def test_linear_matches_log_domain(self, linear_schedule):
        """Test the cumulative product against a log-space sum."""
        betas = torch.linspace(1e-4, 0.02, 1000, dtype=torch.float64)
        expected = math.exp(float(torch.log1p(-betas).sum()))

        assert linear_schedule.alpha_bar_at(999) == pytest.approx(expected, rel=1e-9)

    def test_cosine_decreasing(self, cosine_schedule):
        """Test that the cosine schedule decreases to almost zero."""
        alpha_bar = cosine_schedule.alpha_bar

        assert bool((alpha_bar[1:] < alpha_bar[:-1]).all())
        assert cosine_schedule.alpha_bar_at(999) < 1e-3

    def test_clean_timestep(self, cosine_schedule):
        """Test that step -1 means alpha_bar = 1."""
        assert cosine_schedule.alpha_bar_at(-1) == 1.0
        assert cosine_schedule.noise_coef(-1) == 0.0

    def test_out_of_range_step(self, cosine_schedule):
        with pytest.raises(ValueError):
            cosine_schedule.alpha_bar_at(1000)

    def test_literal_noise_coefficient(self):
        """Test the (1 - alpha_bar) noise coefficient variant."""
        schedule = make_schedule("cosine", 100, variance_as_noise_coef=True)

        assert schedule.noise_coef(50) == pytest.approx(1.0 - schedule.alpha_bar_at(50))

    def test_rejects_increasing_alpha_bar(self):
        """Test that a non-decreasing alpha_bar is rejected."""
        betas = torch.tensor([0.1, 0.1], dtype=torch.float64)
        with pytest.raises(ValueError, match="decreasing"):
            DiffusionSchedule("linear", betas, torch.tensor([0.9, 0.95], dtype=torch.float64))

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            make_schedule("cosine", 0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_schedule("sigmoid", 10)


class TestNormalization:
    """Tests for metric <-> signal space mapping."""

    def test_midpoint_maps_to_zero(self, kitti_normalizer):
        """Test that the range midpoint has zero center components."""
        box = Box3D(24.4, 0.0, -1.0, 4.0, 1.6, 1.5, 0.0)

        assert normalize(box, kitti_normalizer)[:3].tolist() == pytest.approx([0, 0, 0], abs=1e-12)

    def test_upper_bound_maps_to_scale(self, kitti_normalizer):
        """Test that cx at the x upper bound maps to +2."""
        box = Box3D(46.8, 0.0, -1.0, 4.0, 1.6, 1.5, 0.0)

        assert float(normalize(box, kitti_normalizer)[0]) == pytest.approx(2.0)

    def test_round_trip(self, kitti_normalizer):
        """Test that normalize then denormalize returns the box."""
        box = Box3D(10.3, -4.2, -1.1, 3.9, 1.6, 1.5, -1.2)
        restored = denormalize(normalize(box, kitti_normalizer), kitti_normalizer)

        assert restored.as_tuple() == pytest.approx(box.as_tuple(), abs=1e-9)

    def test_out_of_range_center(self, kitti_normalizer):
        """Test that centers outside the range are reported."""
        boxes = torch.tensor([[60.0, 0, 0, 1, 1, 1, 0]], dtype=torch.float64)

        with pytest.raises(OutOfRangeError):
            normalize_boxes(boxes, kitti_normalizer)

    def test_unchecked_normalization(self, kitti_normalizer):
        boxes = torch.tensor([[60.0, 0, 0, 1, 1, 1, 0]], dtype=torch.float64)

        assert normalize_boxes(boxes, kitti_normalizer, check_range=False)[0, 0] > 2.0

    def test_denormalize_floors_sizes(self, kitti_normalizer):
        """Test that decoded sizes stay positive."""
        signal = torch.full((1, 7), -10.0, dtype=torch.float64)

        assert bool((denormalize_boxes(signal, kitti_normalizer)[:, 3:6] > 0).all())

    def test_clamp(self, kitti_normalizer):
        signal = torch.tensor([[-9.0, 9.0, 0, 0, 0, 0, 0]], dtype=torch.float64)

        assert clamp_signal(signal, kitti_normalizer)[0, :2].tolist() == [-6.0, 6.0]

    def test_range_diagonal(self):
        normalizer = BoxNormalizer((0, 0, 0), (3, 4, 12), (1, 1, 1))

        assert normalizer.range_diagonal == pytest.approx(13.0)

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            BoxNormalizer((0, 0, 0), (0, 1, 1), (1, 1, 1))


class TestCorrupt:
    """Tests for forward corruption."""

    def test_zero_noise(self, cosine_schedule):
        """Test that zero noise scales the signal by sqrt(alpha_bar)."""
        u0 = torch.randn(5, 7, dtype=torch.float64)
        out = corrupt(u0, 400, torch.zeros_like(u0), cosine_schedule)

        torch.testing.assert_close(out, math.sqrt(cosine_schedule.alpha_bar_at(400)) * u0)

    def test_near_identity_at_zero(self, linear_schedule):
        u0 = torch.ones(3, 7, dtype=torch.float64)
        noise = torch.randn(3, 7, dtype=torch.float64)

        assert (corrupt(u0, 0, noise, linear_schedule) - u0).abs().max() < 0.05

    def test_sample_moments(self, cosine_schedule, generator):
        """Test empirical mean and variance against the closed form."""
        t = 300
        u0 = torch.tensor([0.7], dtype=torch.float64)
        noise = torch.randn(100_000, 1, generator=generator, dtype=torch.float64)
        samples = corrupt(u0, t, noise, cosine_schedule)
        a = cosine_schedule.alpha_bar_at(t)

        std_err = math.sqrt((1 - a) / 100_000)
        assert abs(float(samples.mean()) - math.sqrt(a) * 0.7) < 4 * std_err
        assert float(samples.var()) == pytest.approx(1 - a, rel=0.02)

    def test_invalid_timestep(self, cosine_schedule):
        u0 = torch.zeros(1, 7, dtype=torch.float64)

        with pytest.raises(ValueError):
            corrupt(u0, 1000, u0, cosine_schedule)

    def test_implied_noise_inverts_corruption(self, cosine_schedule):
        u0 = torch.randn(4, 7, dtype=torch.float64)
        noise = torch.randn(4, 7, dtype=torch.float64)
        u_t = corrupt(u0, 600, noise, cosine_schedule)

        torch.testing.assert_close(implied_noise(u_t, u0, 600, cosine_schedule), noise)

    def test_sample_timestep_in_range(self, cosine_schedule, generator):
        assert all(0 <= sample_timestep(cosine_schedule, generator) < 1000 for _ in range(50))


class TestPadGroundTruth:
    """Tests for proposal padding."""

    def test_two_objects(self, generator):
        """Test padding 2 boxes to 300 proposals."""
        gt = torch.randn(2, 7, dtype=torch.float64)
        boxes, pad_mask = pad_ground_truth(gt, 300, generator)

        assert boxes.shape == (300, 7)
        assert int(pad_mask.sum()) == 298
        assert int((~pad_mask).sum()) == 2
        torch.testing.assert_close(boxes[:2], gt)

    def test_empty_scene(self, generator):
        boxes, pad_mask = pad_ground_truth(torch.zeros(0, 7, dtype=torch.float64), 10, generator)

        assert boxes.shape == (10, 7)
        assert bool(pad_mask.all())

    def test_saturated(self, generator):
        """Test that M = N leaves the input unchanged."""
        gt = torch.randn(6, 7, dtype=torch.float64)
        boxes, pad_mask = pad_ground_truth(gt, 6, generator)

        torch.testing.assert_close(boxes, gt)
        assert not bool(pad_mask.any())

    def test_too_many_objects(self, generator):
        with pytest.raises(ValueError, match="proposals"):
            pad_ground_truth(torch.zeros(4, 7, dtype=torch.float64), 3, generator)


class TestNoisyBoxSet:
    """Tests for the corrupted proposal set."""

    def test_padded_and_corrupted(self, cosine_schedule, generator):
        gt = torch.zeros(2, 7, dtype=torch.float64)
        boxes, pad_mask = pad_ground_truth(gt, 5, generator)
        noisy = NoisyBoxSet(
            boxes=corrupt(boxes, 500, torch.randn(5, 7, dtype=torch.float64), cosine_schedule),
            t=500,
            pad_mask=pad_mask,
        )

        assert len(noisy) == 5
        assert noisy.num_padded == 3

    def test_rejects_non_finite(self):
        boxes = torch.zeros(2, 7)
        boxes[0, 0] = math.inf

        with pytest.raises(ValueError, match="finite"):
            NoisyBoxSet(boxes=boxes, t=0, pad_mask=torch.zeros(2, dtype=torch.bool))

    def test_rejects_mask_mismatch(self):
        with pytest.raises(ValueError, match="pad_mask"):
            NoisyBoxSet(boxes=torch.zeros(2, 7), t=0, pad_mask=torch.zeros(3, dtype=torch.bool))

    def test_rejects_negative_timestep(self):
        with pytest.raises(ValueError, match="Timestep"):
            NoisyBoxSet(boxes=torch.zeros(1, 7), t=-1, pad_mask=torch.zeros(1, dtype=torch.bool))


class TestDdim:
    """Tests for the DDIM sampler steps."""

    def test_timesteps(self):
        """Test the evenly spaced schedule ending at the clean step."""
        assert ddim_timesteps(1000, 4) == [(999, 749), (749, 499), (499, 249), (249, -1)]
        assert ddim_timesteps(1000, 1) == [(999, -1)]

    def test_timesteps_bounds(self):
        with pytest.raises(ValueError):
            ddim_timesteps(10, 11)

    def test_final_step_returns_prediction(self, cosine_schedule):
        """Test that stepping to the clean step yields x0."""
        u_t = torch.randn(5, 7, dtype=torch.float64)
        x0 = torch.randn(5, 7, dtype=torch.float64)

        torch.testing.assert_close(ddim_step(u_t, x0, 249, -1, cosine_schedule), x0)

    def test_self_consistency(self, cosine_schedule):
        """Test that an exact x0 keeps the sample on its noise trajectory."""
        u0 = torch.randn(5, 7, dtype=torch.float64)
        noise = torch.randn(5, 7, dtype=torch.float64)
        u_t = corrupt(u0, 800, noise, cosine_schedule)

        torch.testing.assert_close(
            ddim_step(u_t, u0, 800, 300, cosine_schedule), corrupt(u0, 300, noise, cosine_schedule)
        )

    def test_matches_direct_formula(self, linear_schedule):
        """Test one step against a direct re-evaluation of the update."""
        u_t = torch.randn(3, 7, dtype=torch.float64)
        x0 = torch.randn(3, 7, dtype=torch.float64)
        a_t = float(linear_schedule.alpha_bar[999])
        a_prev = float(linear_schedule.alpha_bar[499])
        eps = (u_t - math.sqrt(a_t) * x0) / math.sqrt(1 - a_t)
        expected = math.sqrt(a_prev) * x0 + math.sqrt(1 - a_prev) * eps

        torch.testing.assert_close(ddim_step(u_t, x0, 999, 499, linear_schedule), expected)

    def test_perfect_oracle_recovers_signal(self, cosine_schedule, generator):
        """Test that a denoiser returning the truth ends on the truth."""
        u0 = torch.randn(6, 7, dtype=torch.float64)
        u = torch.randn(6, 7, generator=generator, dtype=torch.float64)
        for t, t_prev in ddim_timesteps(1000, 8):
            u = ddim_step(u, u0, t, t_prev, cosine_schedule)

        assert (u - u0).abs().max() < 1e-5

    def test_invalid_order(self, cosine_schedule):
        u = torch.zeros(1, 7, dtype=torch.float64)

        with pytest.raises(ValueError):
            ddim_step(u, u, 100, 200, cosine_schedule)

    def test_renewal_keeps_selected_rows(self, generator):
        signal = torch.zeros(4, 7, dtype=torch.float64)
        keep = torch.tensor([True, False, True, False])
        renewed = renew_boxes(signal, keep, generator)

        assert bool((renewed[keep] == 0).all())
        assert bool((renewed[~keep] != 0).all())
