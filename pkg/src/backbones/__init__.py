from .cache import EmbeddingCache, content_key
from .gateway import BackboneGateway, build_gateway, check_rgb
from .stub import StubGateway, disk_kernels, stub_frequency_matrix
