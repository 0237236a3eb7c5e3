#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "core/io_util.hpp"

using namespace core;

TEST_CASE("atomic writes create parent directories and replace content whole") {
  std::string dir = "/tmp/core_test_io/nested";
  std::filesystem::remove_all("/tmp/core_test_io");
  std::string path = dir + "/file.txt";
  atomic_write_file(path, "first");
  CHECK(read_file(path) == "first");
  atomic_write_file(path, "second");
  CHECK(read_file(path) == "second");
  // No leftover temp files in the directory.
  std::size_t entries = 0;
  for (auto& entry : std::filesystem::directory_iterator(dir)) {
    (void)entry;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("missing files raise data errors") {
  CHECK_THROWS_AS(read_file("/tmp/core_test_io/does_not_exist"), data_error);
  CHECK_THROWS_AS(read_json_lines("/tmp/core_test_io/does_not_exist"), data_error);
}

TEST_CASE("json lines parse per line and report the offending line number") {
  std::string path = "/tmp/core_test_io/lines.jsonl";
  atomic_write_file(path, "{\"a\":1}\n\n{\"b\":2}\n");
  auto records = read_json_lines(path);
  REQUIRE(records.size() == 2);  // blank lines skipped
  CHECK(records[0].at("a") == 1);
  CHECK(records[1].at("b") == 2);

  atomic_write_file(path, "{\"a\":1}\n{oops\n");
  try {
    read_json_lines(path);
    FAIL("expected a parse error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("json lines writer and reader are inverses") {
  std::vector<json> records = {{{"x", 1}}, {{"y", "text"}}};
  std::string path = "/tmp/core_test_io/roundtrip.jsonl";
  atomic_write_file(path, to_json_lines(records));
  CHECK(read_json_lines(path) == records);
  CHECK(to_json_lines({}) == "");
}

TEST_CASE("parallel_for covers every index exactly once at any worker count") {
  for (int jobs : {1, 3, 8}) {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h = 0;
    parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("no indices to visit"); });
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_AS(parallel_for(16, 4,
                               [](std::size_t i) {
                                 if (i == 7) throw data_error("boom");
                               }),
                  data_error);
}
