#ifndef CCT_DATAFLOW_HPP
#define CCT_DATAFLOW_HPP

#include <string>
#include <vector>

namespace cct {

struct VarOccurrence {
  std::string name;
  std::size_t line_index = 0;   // 0-based
  std::size_t token_index = 0;  // 0-based within the line's token list

  bool operator==(const VarOccurrence&) const = default;
};

// "Where-the-value-comes-from" edges, ordered by use position then source
// position. Each edge pairs a variable use with the occurrence it reads from.
struct DataFlowGraph {
  struct Edge {
    VarOccurrence use;
    VarOccurrence source;

    bool operator==(const Edge&) const = default;
  };
  std::vector<Edge> edges;

  bool operator==(const DataFlowGraph&) const = default;
};

// Def-use extraction over a mini imperative language, line by line:
//   (a) `IDENT = <expr>` defines IDENT at token 0 (visible from the next
//       line; `==` comparisons are not assignments);
//   (b) each identifier in an expression is a use with an edge to the most
//       recent prior definition of that name, when one exists;
//   (c) assignment lines add one edge from each RHS use to the LHS
//       definition;
//   (d) non-assignment lines contribute uses only.
// Identifiers inside quoted spans, call names directly followed by `(`, and
// keywords/literals are not uses. Unparseable content degrades to fewer
// edges, never to an error.
DataFlowGraph extract_dataflow(const std::vector<std::string>& code_lines);

// `use source [EDGE] use source ...`; empty for an empty graph.
std::vector<std::string> serialize_edges(const DataFlowGraph& graph);

// `[CLS] <old code tokens> [SEP] <old edges> [SEP] <new edges>`
std::vector<std::string> build_cdg_input(const std::vector<std::string>& old_code_lines,
                                         const DataFlowGraph& old_df, const DataFlowGraph& new_df);

bool is_identifier_token(const std::string& token);
bool is_keyword_token(const std::string& token);

}  // namespace cct

#endif  // CCT_DATAFLOW_HPP
