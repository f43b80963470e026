#pragma once

#include <stdexcept>
#include <string>

namespace isoplan {

/// Base class for every error this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct CyclicGraph : Error {
  explicit CyclicGraph(const std::string& what) : Error(what) {}
};

struct DanglingEdge : Error {
  explicit DanglingEdge(const std::string& what) : Error(what) {}
};

struct InvalidInstance : Error {
  explicit InvalidInstance(const std::string& what) : Error(what) {}
};

struct Unreachable : Error {
  explicit Unreachable(const std::string& what) : Error(what) {}
};

struct InfeasibleRange : Error {
  explicit InfeasibleRange(const std::string& what) : Error(what) {}
};

struct UnparseableTime : Error {
  explicit UnparseableTime(const std::string& what) : Error(what) {}
};

struct InvalidAlpha : Error {
  explicit InvalidAlpha(const std::string& what) : Error(what) {}
};

struct DegenerateInput : Error {
  explicit DegenerateInput(const std::string& what) : Error(what) {}
};

struct MismatchedIds : Error {
  explicit MismatchedIds(const std::string& what) : Error(what) {}
};

struct UnknownInstance : Error {
  explicit UnknownInstance(const std::string& what) : Error(what) {}
};

struct UnknownFormat : Error {
  explicit UnknownFormat(const std::string& what) : Error(what) {}
};

struct EndpointUnreachable : Error {
  explicit EndpointUnreachable(const std::string& what) : Error(what) {}
};

struct SchemaMismatch : Error {
  explicit SchemaMismatch(const std::string& what) : Error(what) {}
};

}  // namespace isoplan
