#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <thread>
#include <vector>

#include "prism/cache.hpp"

using namespace prism;

TEST_CASE("cache returns stored values and counts hits") {
  LruCache<std::string, int> cache(4);
  REQUIRE(!cache.get("a").has_value());
  REQUIRE(cache.misses() == 1);
  cache.put("a", 1);
  auto v = cache.get("a");
  REQUIRE(v.has_value());
  REQUIRE(*v == 1);
  REQUIRE(cache.hits() == 1);
}

TEST_CASE("eviction removes the least recently used entry") {
  LruCache<std::string, int> cache(3);
  cache.put("a", 1);
  cache.put("b", 2);
  cache.put("c", 3);
  REQUIRE(cache.get("a").has_value());  // promote a over b
  cache.put("d", 4);                    // b is now the oldest
  REQUIRE(!cache.get("b").has_value());
  REQUIRE(cache.get("a").has_value());
  REQUIRE(cache.get("c").has_value());
  REQUIRE(cache.get("d").has_value());
  REQUIRE(cache.size() == 3);
}

TEST_CASE("updating an existing key does not grow the cache") {
  LruCache<int, int> cache(2);
  cache.put(1, 10);
  cache.put(1, 11);
  cache.put(2, 20);
  REQUIRE(cache.size() == 2);
  REQUIRE(*cache.get(1) == 11);
}

TEST_CASE("zero capacity is rejected") {
  REQUIRE_THROWS_AS((LruCache<int, int>(0)), ConfigError);
}

TEST_CASE("concurrent access maintains the capacity bound and values") {
  LruCache<int, int> cache(64);
  auto f = [](int k) { return k * 31 + 7; };
  std::vector<std::thread> threads;
  std::atomic<bool> ok{true};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t]() {
      for (int i = 0; i < 5000; ++i) {
        int k = (i * 13 + t * 101) % 256;
        if (i % 3 == 0) {
          cache.put(k, f(k));
        } else if (auto v = cache.get(k)) {
          if (*v != f(k)) ok = false;
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  REQUIRE(ok.load());
  REQUIRE(cache.size() <= 64);
  REQUIRE(cache.hits() + cache.misses() > 0);
}
