import pytest

from vien.quant import kernel_backend, numba_available, set_kernel_backend

BACKENDS = ["numpy"] + (["numba"] if numba_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = kernel_backend()
    set_kernel_backend(request.param)
    yield request.param
    set_kernel_backend(prev)
