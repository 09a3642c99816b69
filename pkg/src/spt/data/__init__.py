"""Data images, recording buffers, and extraction protocols."""

from .extraction import (LossyChannel, ScriptedChannel, StreamSession, WindowedStats,
                         compare_protocols, read_sdp_windowed, read_streamed)
from .generation import GENERATORS, MappingInfo, generate_all, generate_data, register_generator
from .recording import (BufferManager, Recorder, RunPlan, chunk_steps, cycle_length,
                        plan_runs, run_buffered)
from .regions import DataImage, pack_words, parse_image, read_image_regions, unpack_words

__all__ = [
    "LossyChannel", "ScriptedChannel", "StreamSession", "WindowedStats", "compare_protocols",
    "read_sdp_windowed", "read_streamed", "GENERATORS", "MappingInfo", "generate_all",
    "generate_data", "register_generator", "BufferManager", "Recorder", "RunPlan",
    "chunk_steps", "cycle_length", "plan_runs", "run_buffered", "DataImage", "pack_words",
    "parse_image", "read_image_regions", "unpack_words",
]
