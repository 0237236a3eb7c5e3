#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace core {

using json = nlohmann::json;

// Reads a whole file; throws data_error if it cannot be opened.
std::string read_file(const std::string& path);

// Writes atomically: temp file in the same directory, then rename.
void atomic_write_file(const std::string& path, const std::string& content);

// Parses one JSON object per non-empty line; throws data_error with the
// line number on malformed input.
std::vector<json> read_json_lines(const std::string& path);

std::string to_json_lines(const std::vector<json>& records);

// Runs fn(i) for i in [0, n) on up to jobs threads. Results must be written
// by index; assignment is static so output never depends on scheduling.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace core
