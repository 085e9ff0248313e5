#include <pybind11/pybind11.h>
PYBIND11_MODULE(_scene_mmkg, m) { m.doc() = "stub"; }
