// Copyright 2026-present the vecserve project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vecserve/corpus.h"
#include "vecserve/embed.h"
#include "vecserve/engine.h"
#include "vecserve/ivfpq.h"
#include "vecserve/rerank.h"
#include "vecserve/service.h"
#include "vecserve/vamana.h"

namespace py = pybind11;
using namespace vecserve;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::kDimension, "expected a 2-d float array");
  std::vector<float> values(a.data(), a.data() + a.size());
  return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), std::move(values));
}

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw Error(ErrorCode::kDimension, "expected a 1-d float array");
  return {a.data(), a.data() + a.size()};
}

FloatArray to_array(const Matrix& m) {
  FloatArray out({m.rows(), m.dim()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

std::vector<std::pair<ChunkId, float>> to_pairs(const std::vector<Hit>& hits) {
  std::vector<std::pair<ChunkId, float>> out;
  out.reserve(hits.size());
  for (const auto& h : hits) out.emplace_back(h.id, h.score);
  return out;
}

py::dict chunk_dict(const Chunk& c) {
  py::dict d;
  d["chunk_id"] = c.id;
  d["doc_id"] = c.doc_id;
  d["source"] = c.source;
  d["text"] = c.text;
  d["span"] = py::make_tuple(c.char_span.start, c.char_span.end);
  return d;
}

}  // namespace

PYBIND11_MODULE(_vecserve, m) {
  m.doc() = "Native core of the vecserve retrieval engine";

  static PyObject* error_type =
      PyErr_NewException("vecserve._vecserve.VecserveError", PyExc_RuntimeError, nullptr);
  m.attr("VecserveError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string code(error_code_name(e.code()));
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(code + ": " + e.what());
      exc.attr("code") = code;
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::class_<ReferenceEncoder>(m, "ReferenceEncoder")
      .def(py::init<uint32_t>(), py::arg("dim") = 64)
      .def_property_readonly("dim", [](const ReferenceEncoder& e) { return e.dim(); })
      .def("encode", [](const ReferenceEncoder& e, const std::vector<std::string>& texts) {
        Matrix out;
        {
          py::gil_scoped_release release;
          out = e.encode(texts);
        }
        return to_array(out);
      });

  m.def(
      "ingest_jsonl",
      [](const std::filesystem::path& input, const std::filesystem::path& out, uint32_t window, uint32_t overlap,
         bool strict) {
        IngestReport r = ingest_jsonl(input, {window, overlap, strict}, out);
        py::dict d;
        d["documents"] = r.documents;
        d["chunks"] = r.chunks;
        d["skipped_records"] = r.skipped_records;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("input"), py::arg("out"), py::arg("window") = 256, py::arg("overlap") = 32, py::arg("strict") = false);

  py::class_<ChunkStore>(m, "ChunkStore")
      .def(py::init<const std::filesystem::path&>())
      .def("__len__", &ChunkStore::size)
      .def("lookup", [](const ChunkStore& s, ChunkId id) { return chunk_dict(s.lookup(id)); });

  py::class_<VamanaGraph>(m, "VamanaGraph")
      .def_static(
          "build",
          [](const FloatArray& vectors, uint32_t R, uint32_t L_build, float alpha, uint64_t seed, uint32_t threads) {
            Matrix data = to_matrix(vectors);
            VamanaParams p;
            p.R = R;
            p.L_build = L_build;
            p.alpha = alpha;
            p.seed = seed;
            p.threads = threads;
            py::gil_scoped_release release;
            return VamanaGraph::build(data, p);
          },
          py::arg("vectors"), py::arg("R") = 64, py::arg("L_build") = 128, py::arg("alpha") = 1.2f,
          py::arg("seed") = 42, py::arg("threads") = 1)
      .def_static("load", &VamanaGraph::load)
      .def("save", &VamanaGraph::save)
      .def("__len__", &VamanaGraph::size)
      .def_property_readonly("entry_point", &VamanaGraph::entry_point)
      .def("neighbors",
           [](const VamanaGraph& g, uint32_t node) {
             auto n = g.neighbors(node);
             return std::vector<uint32_t>(n.begin(), n.end());
           })
      .def(
          "search",
          [](const VamanaGraph& g, const FloatArray& q, uint32_t k, uint32_t L, uint32_t W) {
            auto query = to_vector(q);
            return to_pairs(g.search(query, {L, W, k}));
          },
          py::arg("query"), py::arg("k") = 10, py::arg("L") = 128, py::arg("W") = 4);

  py::class_<MappedVamanaGraph>(m, "MappedVamanaGraph")
      .def(py::init<const std::filesystem::path&>())
      .def("__len__", &MappedVamanaGraph::size)
      .def(
          "search",
          [](const MappedVamanaGraph& g, const FloatArray& q, uint32_t k, uint32_t L, uint32_t W) {
            auto query = to_vector(q);
            return to_pairs(g.search(query, {L, W, k}));
          },
          py::arg("query"), py::arg("k") = 10, py::arg("L") = 128, py::arg("W") = 4);

  py::class_<IvfPqIndex>(m, "IvfPqIndex")
      .def_static(
          "build",
          [](const FloatArray& vectors, uint32_t n_lists, uint32_t m_sub, uint64_t seed, bool exact_codes) {
            Matrix data = to_matrix(vectors);
            IvfPqParams p;
            p.n_lists = n_lists;
            p.m = m_sub;
            p.seed = seed;
            p.exact_codes = exact_codes;
            py::gil_scoped_release release;
            IvfPqIndex index = IvfPqIndex::train(data, p);
            index.add_all(data);
            return index;
          },
          py::arg("vectors"), py::arg("n_lists") = 0, py::arg("m") = 8, py::arg("seed") = 42,
          py::arg("exact_codes") = false)
      .def_static("load", &IvfPqIndex::load)
      .def("save", &IvfPqIndex::save)
      .def("__len__", &IvfPqIndex::size)
      .def_property_readonly("n_lists", &IvfPqIndex::n_lists)
      .def(
          "search",
          [](const IvfPqIndex& index, const FloatArray& q, uint32_t k, uint32_t n_probe) {
            auto query = to_vector(q);
            return to_pairs(index.search(query, k, n_probe));
          },
          py::arg("query"), py::arg("k") = 10, py::arg("n_probe") = 8);

  m.def(
      "mmr_select",
      [](const FloatArray& query, const FloatArray& vectors, const std::vector<ChunkId>& ids, std::size_t k,
         double lambda) {
        auto q = to_vector(query);
        Matrix data = to_matrix(vectors);
        if (ids.size() != data.rows()) throw Error(ErrorCode::kInvalidArgument, "one id per vector row required");
        std::vector<MmrCandidate> cands;
        for (std::size_t i = 0; i < ids.size(); ++i) cands.push_back({ids[i], data.row(i)});
        std::vector<std::pair<ChunkId, float>> out;
        for (const auto& h : mmr_select(q, cands, k, lambda)) out.emplace_back(h.chunk_id, h.score);
        return out;
      },
      py::arg("query"), py::arg("vectors"), py::arg("ids"), py::arg("k"), py::arg("lambda_") = 0.5);

  py::class_<Engine, std::shared_ptr<Engine>>(m, "Engine")
      .def(py::init([](const std::filesystem::path& config_path) {
        return std::make_shared<Engine>(load_serve_config(config_path).engine);
      }))
      .def("search_json",
           [](const Engine& e, const std::string& body) {
             ParsedRequest parsed = parse_search_request(nlohmann::json::parse(body), e.config().defaults);
             if (!parsed.request) {
               std::string msg;
               for (const auto& f : parsed.errors) msg += (msg.empty() ? "" : "; ") + f.field + ": " + f.message;
               throw Error(ErrorCode::kInvalidArgument, msg);
             }
             SearchResponse resp;
             {
               py::gil_scoped_release release;
               resp = e.search(*parsed.request);
             }
             resp.warnings.insert(resp.warnings.begin(), parsed.warnings.begin(), parsed.warnings.end());
             return to_json(resp).dump();
           })
      .def("describe_json", [](const Engine& e) { return e.describe().dump(); });
}
