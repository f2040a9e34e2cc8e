from .brdf import ggx_brdf, ggx_ndf
from .bvh import Bvh, Hit, build_bvh, intersect
from .proxy import (
    PASSES,
    ProxyStack,
    RenderSettings,
    decode_frame,
    encode_frame,
    frame_key,
    load_proxy,
    render_pass,
    render_proxy,
    save_previews,
    save_proxy,
    tonemap,
)
