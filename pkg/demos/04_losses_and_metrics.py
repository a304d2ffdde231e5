"""Losses and metrics on a pair of renders of the same avatar.

Renders a neutral and an expressive frame, then evaluates the supervisable
losses (L1, silhouette mask, offset regularizer, weighted total) and the
image metrics (PSNR, SSIM). The perceptual term is an optional plug-in and
contributes zero here.
"""

import numpy as np

from splatar import PosedGaussianSet, RenderTarget, animate, bake, render
from splatar import synth
from splatar.losses import LossWeights, l1_loss, mask_loss, offset_reg, psnr, ssim, total_loss

rng = np.random.default_rng(33)
rig = synth.make_mini_rig(rng, n_points=50, joints=3, n_expr=10)
avatar = bake(rig, rng.standard_normal(rig.n_shape) * 0.4, iterations=2)
out = PosedGaussianSet.for_avatar(avatar)
cam = synth.make_camera(128, 128, distance=0.6)

neutral = RenderTarget(128, 128)
animate(avatar, np.zeros(3 * avatar.num_joints), np.zeros(avatar.n_expr), out)
render(out, cam, neutral)

expressive = RenderTarget(128, 128)
phi = np.zeros(avatar.n_expr)
phi[:3] = (2.0, -1.5, 1.0)
animate(avatar, np.zeros(3 * avatar.num_joints), phi, out)
render(out, cam, expressive)

l1 = l1_loss(expressive.rgb, neutral.rgb)
mask = mask_loss(expressive.alpha, neutral.alpha)
offsets = rng.standard_normal((avatar.num_points, 3)) * 0.002
weights = LossWeights()  # l1 = lpips = mask = 1, offset = 0.1
off = offset_reg(offsets, weights.eps)
total = total_loss(l1, mask, off, weights)

print(f"L1(expressive, neutral)      = {l1:.5f}")
print(f"mask L1 on silhouettes       = {mask:.5f}")
print(f"offset regularizer (eps={weights.eps:g}) = {off:.2e}")
print(f"weighted total (lpips absent) = {total:.5f}")
print()
print(f"PSNR  = {psnr(expressive.rgb, neutral.rgb):.2f} dB "
      f"(identical images report the {psnr(neutral.rgb, neutral.rgb):.0f} dB cap)")
print(f"SSIM  = {ssim(expressive.rgb, neutral.rgb):.4f} "
      f"(identical images give {ssim(neutral.rgb, neutral.rgb):.1f})")
