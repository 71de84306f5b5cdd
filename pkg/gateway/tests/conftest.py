import os
import threading

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import pytest

from tiny_models import build_tiny_align, build_tiny_lm
from vgd_gateway import GatewayConfig, load_align, load_lm, make_server


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    root = tmp_path_factory.mktemp("checkpoints")
    gpt2_dir = root / "tiny-gpt2"
    llama_dir = root / "tiny-llama"
    clip_dir = root / "tiny-clip"
    build_tiny_lm(gpt2_dir, family="gpt2", seed=0)
    build_tiny_lm(llama_dir, family="llama", seed=7)
    build_tiny_align(clip_dir, seed=1)
    return {"gpt2": str(gpt2_dir), "llama": str(llama_dir), "clip": str(clip_dir)}


def _start(config: GatewayConfig):
    lm = load_lm(config.lm_id, config.device)
    align = load_align(config.align_id, config.device)
    server = make_server(config, lm, align, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    return server, thread, url


@pytest.fixture(scope="session")
def gpt2_gateway(checkpoints):
    config = GatewayConfig(
        lm_id=checkpoints["gpt2"], align_id=checkpoints["clip"], chat_format="llama2"
    )
    server, thread, url = _start(config)
    yield url
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


@pytest.fixture(scope="session")
def llama_gateway(checkpoints):
    config = GatewayConfig(
        lm_id=checkpoints["llama"], align_id=checkpoints["clip"], chat_format="chatml"
    )
    server, thread, url = _start(config)
    yield url
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)
