"""Optional diffusion backend behind the standard contract.

Wraps a locally installed edge-conditioned text-to-image adapter pipeline
and an inpainting pipeline. Model weights are multi-GB and outputs are not
bit-reproducible across hardware, so this backend is never required by the
test suite; construction fails cleanly when the dependencies or weights are
absent. For out-of-process hosting use the sidecar protocol instead.
"""

from __future__ import annotations

import numpy as np

from .errors import InferenceFailure
from .imaging import EdgeMap, MaskImage, RasterImage
from .pipeline import BackendDescriptor, GenerationParams, Prompt

SKETCH_MODEL_ID = "TencentARC/t2iadapter_sketch_sd15v2"
BASE_MODEL_ID = "runwayml/stable-diffusion-v1-5"
INPAINT_MODEL_ID = "kandinsky-community/kandinsky-2-2-decoder-inpaint"


class DiffusionBackend:
    """GPU-backed backend; serialized to one request at a time."""

    max_concurrency = 1

    def __init__(self, device: str = "cuda"):
        try:
            import torch
            from diffusers import (
                AutoPipelineForInpainting,
                StableDiffusionAdapterPipeline,
                T2IAdapter,
            )
        except ImportError as exc:
            raise InferenceFailure(
                "diffusion backend requires the 'diffusers' and 'torch' packages"
            ) from exc
        self._torch = torch
        self.device = device
        adapter = T2IAdapter.from_pretrained(SKETCH_MODEL_ID, local_files_only=True)
        self._sketch = StableDiffusionAdapterPipeline.from_pretrained(
            BASE_MODEL_ID, adapter=adapter, local_files_only=True).to(device)
        self._inpaint = AutoPipelineForInpainting.from_pretrained(
            INPAINT_MODEL_ID, local_files_only=True).to(device)
        self.descriptor = BackendDescriptor(
            name="diffusion",
            capabilities=frozenset({"sketch_to_image", "inpaint"}),
            local_only=True,
            model_ids=(SKETCH_MODEL_ID, BASE_MODEL_ID, INPAINT_MODEL_ID),
        )

    def _generator(self, seed: int):
        return self._torch.Generator(device=self.device).manual_seed(seed % (2 ** 63))

    def sketch_to_image(self, edges: EdgeMap, prompt: Prompt,
                        params: GenerationParams) -> RasterImage:
        from PIL import Image

        w, h = params.output_size
        result = self._sketch(
            prompt=prompt.text,
            negative_prompt=prompt.negative_text,
            image=Image.fromarray(edges.intensities).convert("RGB"),
            num_inference_steps=params.steps,
            guidance_scale=params.guidance_scale,
            adapter_conditioning_scale=params.conditioning_scale,
            width=w, height=h,
            generator=self._generator(params.seed),
        ).images[0]
        return RasterImage(pixels=np.asarray(result.convert("RGB"), dtype=np.uint8))

    def inpaint(self, image: RasterImage, mask: MaskImage, prompt: Prompt,
                params: GenerationParams) -> RasterImage:
        from PIL import Image

        result = self._inpaint(
            prompt=prompt.text,
            negative_prompt=prompt.negative_text,
            image=Image.fromarray(image.pixels),
            mask_image=Image.fromarray(mask.values),
            num_inference_steps=params.steps,
            guidance_scale=params.guidance_scale,
            generator=self._generator(params.seed),
        ).images[0]
        resized = result.convert("RGB").resize((image.width, image.height))
        return RasterImage(pixels=np.asarray(resized, dtype=np.uint8))
