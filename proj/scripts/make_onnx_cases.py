# Copyright 2026 The Influence Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes single-operator ONNX graphs and their onnxruntime outputs.

tests/fixtures/onnx_cases/<case>.onnx   the graph
tests/fixtures/onnx_cases/cases.json    inputs and expected outputs per case

Needs numpy, onnx and onnxruntime.
"""

import argparse
import json
import os

import numpy as np
import onnx
import onnxruntime as ort
from onnx import TensorProto, helper, numpy_helper

rng = np.random.default_rng(20260101)

F = TensorProto.FLOAT
I = TensorProto.INT64
B = TensorProto.BOOL


def f32(*shape, lo=-2.0, hi=2.0):
    return rng.uniform(lo, hi, size=shape).astype(np.float32)


def i64(*values):
    return np.array(values, dtype=np.int64)


CASES = {}


def case(name, op, inputs, outputs=1, opset=14, attrs=None, consts=None):
    """inputs: list of (name, array or None). None leaves the slot empty.
    consts: names among inputs that become initializers."""
    consts = consts or []
    in_names = [n if a is not None else "" for n, a in inputs]
    out_names = [f"y{k}" for k in range(outputs)]
    node = helper.make_node(op, in_names, out_names, name=f"{op.lower()}_node", **(attrs or {}))
    graph_inputs, inits, feeds = [], [], {}
    for n, a in inputs:
        if a is None:
            continue
        if n in consts:
            inits.append(numpy_helper.from_array(a, n))
        else:
            graph_inputs.append(helper.make_tensor_value_info(n, helper.np_dtype_to_tensor_dtype(a.dtype), a.shape))
            feeds[n] = a
    graph_outputs = [helper.make_empty_tensor_value_info(o) for o in out_names]
    graph = helper.make_graph([node], name, graph_inputs, graph_outputs, inits)
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", opset)])
    model.ir_version = 8
    CASES[name] = (model, feeds, out_names)


def build():
    x234 = f32(2, 3, 4)
    case("add_broadcast", "Add", [("a", x234), ("b", f32(4))])
    case("sub_broadcast", "Sub", [("a", f32(2, 1, 4)), ("b", f32(3, 1))])
    case("mul_outer", "Mul", [("a", f32(3, 1)), ("b", f32(1, 4))])
    case("div", "Div", [("a", x234), ("b", f32(3, 1, lo=0.5, hi=2.0))])
    case("pow", "Pow", [("a", f32(2, 3, lo=0.1, hi=3.0)), ("b", f32(3))])
    case("pow_scalar", "Pow", [("a", f32(2, 3)), ("b", np.array(2.0, dtype=np.float32))], consts=["b"])
    case("add_int", "Add", [("a", i64(1, 2, 3, 4, 5, 6).reshape(2, 3)), ("b", i64(10, 20, 30))])
    case("mul_int", "Mul", [("a", i64(-1, 2, -3).reshape(3, 1)), ("b", i64(4, 5))])
    case("sub_int_scalar", "Sub", [("a", i64(7, 8, 9)), ("b", np.array(3, dtype=np.int64))])
    for op in ["Abs", "Neg", "Exp", "Tanh", "Sigmoid", "Relu", "Floor", "Ceil", "Erf"]:
        case(op.lower(), op, [("x", x234)])
    case("log", "Log", [("x", f32(2, 3, lo=0.01, hi=5.0))])
    case("sqrt", "Sqrt", [("x", f32(2, 3, lo=0.0, hi=5.0))])
    case("reciprocal", "Reciprocal", [("x", f32(2, 3, lo=0.5, hi=5.0))])
    case("abs_int", "Abs", [("x", i64(-3, 0, 4))])
    case("neg_int", "Neg", [("x", i64(-3, 0, 4))])

    ia = i64(1, 2, 3, 4, 5, 6).reshape(2, 3)
    ib = i64(3, 2, 1)
    for op in ["Equal", "Greater", "Less", "GreaterOrEqual", "LessOrEqual"]:
        case(f"{op.lower()}_int", op, [("a", ia), ("b", ib)], opset=16)
    case("greater_float", "Greater", [("a", x234), ("b", f32(4))])
    ba = np.array([[True, False, True], [False, False, True]])
    bb = np.array([True, False, False])
    case("and", "And", [("a", ba), ("b", bb)])
    case("or", "Or", [("a", ba), ("b", bb)])
    case("not", "Not", [("x", ba)])
    case("where", "Where", [("c", ba), ("a", f32(2, 3)), ("b", f32(3))])
    case("where_int", "Where", [("c", bb), ("a", i64(1, 2, 3)), ("b", np.array(0, dtype=np.int64))])
    case("max3", "Max", [("a", f32(2, 3)), ("b", f32(3)), ("c", f32(2, 1))])
    case("min3", "Min", [("a", f32(2, 3)), ("b", f32(3)), ("c", f32(2, 1))])
    case("max_int", "Max", [("a", i64(1, 9, 3)), ("b", i64(4, 5, 6))])

    case("cast_f2i", "Cast", [("x", np.array([-2.7, -0.5, 0.5, 3.9], dtype=np.float32))], attrs={"to": I})
    case("cast_i2f", "Cast", [("x", i64(-2, 0, 7))], attrs={"to": F})
    case("cast_b2f", "Cast", [("x", ba)], attrs={"to": F})
    case("cast_f2b", "Cast", [("x", np.array([0.0, 1.5, -2.0, 0.0], dtype=np.float32))], attrs={"to": B})
    case("cast_i2b", "Cast", [("x", i64(0, 3, -1))], attrs={"to": B})

    case("clip_attrs", "Clip", [("x", x234)], opset=6, attrs={"min": -0.5, "max": 0.75})
    case("clip_inputs", "Clip", [("x", x234), ("lo", np.array(-0.5, dtype=np.float32)),
                                  ("hi", np.array(0.75, dtype=np.float32))], opset=13)
    case("clip_min_only", "Clip", [("x", x234), ("lo", np.array(0.0, dtype=np.float32))], opset=13)
    case("clip_max_only", "Clip", [("x", x234), ("lo", None), ("hi", np.array(0.1, dtype=np.float32))], opset=13)

    case("concat_axis1", "Concat", [("a", f32(2, 1, 4)), ("b", x234)], attrs={"axis": 1})
    case("concat_neg", "Concat", [("a", f32(2, 3, 2)), ("b", x234), ("c", f32(2, 3, 1))], attrs={"axis": -1})
    case("concat_int", "Concat", [("a", i64(1, 2)), ("b", i64(3))], attrs={"axis": 0})

    case("constant_tensor", "Constant", [], attrs={"value": numpy_helper.from_array(f32(2, 2), "v")})
    case("constant_float", "Constant", [], opset=13, attrs={"value_float": 2.5})
    case("constant_ints", "Constant", [], opset=13, attrs={"value_ints": [3, -1, 4]})
    case("constant_of_shape", "ConstantOfShape", [("s", i64(2, 3))],
         attrs={"value": numpy_helper.from_array(np.array([1.5], dtype=np.float32), "v")})
    case("constant_of_shape_default", "ConstantOfShape", [("s", i64(3))])
    case("constant_of_shape_int", "ConstantOfShape", [("s", i64(2, 2))],
         attrs={"value": numpy_helper.from_array(np.array([7], dtype=np.int64), "v")})

    ax1 = np.array(1, dtype=np.int64)
    case("cumsum", "CumSum", [("x", x234), ("axis", ax1)])
    case("cumsum_excl_rev", "CumSum", [("x", x234), ("axis", ax1)], attrs={"exclusive": 1, "reverse": 1})
    case("cumsum_int", "CumSum", [("x", ia), ("axis", np.array(-1, dtype=np.int64))])

    case("expand", "Expand", [("x", f32(3, 1)), ("s", i64(2, 1, 4))])
    case("expand_int", "Expand", [("x", i64(1, 2)), ("s", i64(3, 1))])
    case("flatten", "Flatten", [("x", f32(2, 3, 4, 5))], attrs={"axis": 2})
    case("flatten_zero", "Flatten", [("x", x234)], attrs={"axis": 0})

    table = f32(6, 4)
    case("gather_rows", "Gather", [("t", table), ("idx", i64(0, 5, -1, 2, 2, 3).reshape(2, 3))], consts=["t"])
    case("gather_axis1", "Gather", [("x", x234), ("idx", i64(3, 0))], attrs={"axis": 2})
    case("gather_scalar", "Gather", [("x", x234), ("idx", np.array(1, dtype=np.int64))], attrs={"axis": 1})
    case("gather_int", "Gather", [("x", i64(10, 20, 30, 40)), ("idx", i64(3, 1))])
    case("gather_elements", "GatherElements", [("x", f32(3, 3)), ("idx", i64(0, 2, 1, 1, 0, 2).reshape(2, 3))],
         attrs={"axis": 0})
    case("gather_elements_ax1", "GatherElements", [("x", f32(2, 4)), ("idx", i64(3, -1, 0, 1, 2, 2).reshape(2, 3))],
         attrs={"axis": 1})
    case("gather_nd", "GatherND", [("x", x234), ("idx", i64(0, 1, 1, 2).reshape(2, 2))])
    case("gather_nd_batch", "GatherND", [("x", x234), ("idx", i64(1, 2).reshape(2, 1))],
         attrs={"batch_dims": 1})

    case("gelu", "Gelu", [("x", x234)], opset=20)
    case("gelu_tanh", "Gelu", [("x", x234)], opset=20, attrs={"approximate": "tanh"})
    case("gemm", "Gemm", [("a", f32(3, 5)), ("b", f32(4, 5)), ("c", f32(4))], attrs={"transB": 1, "alpha": 0.5, "beta": 2.0})
    case("gemm_transA", "Gemm", [("a", f32(5, 3)), ("b", f32(5, 4))], attrs={"transA": 1})
    case("identity", "Identity", [("x", x234)])
    case("dropout", "Dropout", [("x", x234)], opset=13)

    case("layernorm", "LayerNormalization", [("x", x234), ("g", f32(4)), ("b", f32(4))], opset=17,
         attrs={"epsilon": 1e-5})
    case("layernorm_2axes", "LayerNormalization", [("x", x234), ("g", f32(3, 4))], opset=17,
         attrs={"axis": -2, "epsilon": 1e-3})
    case("matmul_2d", "MatMul", [("a", f32(3, 5)), ("b", f32(5, 4))])
    case("matmul_batched", "MatMul", [("a", f32(2, 3, 5)), ("b", f32(5, 4))])
    case("matmul_4d", "MatMul", [("a", f32(2, 1, 3, 5)), ("b", f32(1, 2, 5, 4))])
    case("matmul_vec_left", "MatMul", [("a", f32(5)), ("b", f32(2, 5, 4))])
    case("matmul_vec_right", "MatMul", [("a", f32(2, 3, 5)), ("b", f32(5))])

    case("range_int", "Range", [("s", np.array(2, dtype=np.int64)), ("l", np.array(11, dtype=np.int64)),
                                ("d", np.array(3, dtype=np.int64))])
    case("range_float", "Range", [("s", np.array(1.0, dtype=np.float32)), ("l", np.array(-1.0, dtype=np.float32)),
                                  ("d", np.array(-0.5, dtype=np.float32))])
    case("reducemean_attr", "ReduceMean", [("x", x234)], opset=13, attrs={"axes": [-1]})
    case("reducemean_attr_nokeep", "ReduceMean", [("x", x234)], opset=13, attrs={"axes": [0, 2], "keepdims": 0})
    case("reducemean_all", "ReduceMean", [("x", x234)], opset=13)
    case("reducemean_input", "ReduceMean", [("x", x234), ("axes", i64(1))], opset=18)
    case("reducesum_attr", "ReduceSum", [("x", x234)], opset=11, attrs={"axes": [1], "keepdims": 0})
    case("reducesum_input", "ReduceSum", [("x", x234), ("axes", i64(-1, 0))], opset=13)
    case("reducesum_int", "ReduceSum", [("x", ia), ("axes", i64(1))], opset=13)

    case("reshape", "Reshape", [("x", x234), ("s", i64(0, -1))])
    case("reshape_4d", "Reshape", [("x", x234), ("s", i64(2, 3, 2, 2))])
    case("shape", "Shape", [("x", x234)])
    case("shape_slice", "Shape", [("x", x234)], opset=15, attrs={"start": 1, "end": 3})
    case("shape_neg", "Shape", [("x", x234)], opset=15, attrs={"start": -2})

    case("slice_attrs", "Slice", [("x", x234)], opset=9, attrs={"starts": [1, 0], "ends": [3, 2], "axes": [1, 2]})
    case("slice_inputs", "Slice", [("x", x234), ("st", i64(0, 1)), ("en", i64(1, 100)), ("ax", i64(0, -1))], opset=13)
    case("slice_steps", "Slice", [("x", x234), ("st", i64(-1)), ("en", i64(-100)), ("ax", i64(2)), ("sp", i64(-2))],
         opset=13)
    case("slice_default_axes", "Slice", [("x", x234), ("st", i64(1, 1)), ("en", i64(2, 3))], opset=13)

    case("softmax_11", "Softmax", [("x", x234)], opset=11, attrs={"axis": 1})
    case("softmax_13", "Softmax", [("x", x234)], opset=13, attrs={"axis": 1})
    case("softmax_last", "Softmax", [("x", f32(2, 3, 4, lo=-30, hi=30))], opset=13)

    x64 = f32(2, 6)
    case("split_attr", "Split", [("x", x64)], outputs=2, opset=11, attrs={"axis": 1, "split": [2, 4]})
    case("split_input", "Split", [("x", x64), ("s", i64(1, 2, 3))], outputs=3, opset=13, attrs={"axis": -1})
    case("split_even", "Split", [("x", x64)], outputs=3, opset=13, attrs={"axis": 1})
    case("split_num_outputs", "Split", [("x", f32(2, 7))], outputs=3, opset=18, attrs={"axis": 1, "num_outputs": 3})

    x1 = f32(1, 3, 1, 2)
    case("squeeze_attr", "Squeeze", [("x", x1)], opset=11, attrs={"axes": [0, -2]})
    case("squeeze_input", "Squeeze", [("x", x1), ("a", i64(2))], opset=13)
    case("squeeze_all", "Squeeze", [("x", x1)], opset=13)
    case("unsqueeze_attr", "Unsqueeze", [("x", f32(3, 2))], opset=11, attrs={"axes": [0, 3]})
    case("unsqueeze_input", "Unsqueeze", [("x", f32(3, 2)), ("a", i64(-1, 1))], opset=13)
    case("unsqueeze_int", "Unsqueeze", [("x", i64(4, 5)), ("a", i64(0))], opset=13)

    case("transpose", "Transpose", [("x", x234)], attrs={"perm": [2, 0, 1]})
    case("transpose_default", "Transpose", [("x", x234)])
    case("transpose_int", "Transpose", [("x", ia)])


def encode(a):
    a = np.asarray(a)
    if a.dtype == np.bool_:
        kind, data = "bool", a.astype(np.int64).ravel().tolist()
    elif np.issubdtype(a.dtype, np.integer):
        kind, data = "int64", a.astype(np.int64).ravel().tolist()
    else:
        kind, data = "float", [float(v) for v in a.astype(np.float32).ravel()]
    return {"dtype": kind, "shape": list(a.shape), "data": data}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "onnx_cases"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    build()
    opts = ort.SessionOptions()
    opts.graph_optimization_level = ort.GraphOptimizationLevel.ORT_DISABLE_ALL
    index = {}
    for name, (model, feeds, outs) in sorted(CASES.items()):
        data = model.SerializeToString()
        sess = ort.InferenceSession(data, opts, providers=["CPUExecutionProvider"])
        got = sess.run(outs, feeds)
        with open(os.path.join(args.out, f"{name}.onnx"), "wb") as f:
            f.write(data)
        index[name] = {
            "opset": model.opset_import[0].version,
            "inputs": {k: encode(v) for k, v in feeds.items()},
            "outputs": {k: encode(v) for k, v in zip(outs, got)},
        }
    with open(os.path.join(args.out, "cases.json"), "w") as f:
        json.dump(index, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{len(index)} cases")


if __name__ == "__main__":
    main()
