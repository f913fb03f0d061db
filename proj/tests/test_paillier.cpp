#include <gtest/gtest.h>
#include <sys/stat.h>

#include <filesystem>
#include <set>

#include "cipherloop/paillier.hpp"
#include "cipherloop/paillier_private.hpp"
#include "gmp_oracle.hpp"

using cipherloop::BigUint;
namespace pl = cipherloop::paillier;

namespace {

BigUint big(unsigned long v) { return BigUint{v}; }

pl::KeyPair tiny_keys(unsigned long p, unsigned long q) { return pl::keypair_from_primes(big(p), big(q)); }

std::vector<unsigned long> units(unsigned long n) {
  std::vector<unsigned long> out;
  for (unsigned long r = 1; r < n; ++r) {
    if (std::gcd(r, n) == 1) out.push_back(r);
  }
  return out;
}

pl::KeyPair seeded_keys(std::size_t bits, std::uint64_t seed) {
  cipherloop::SeededEntropy rng(seed);
  return pl::keygen(bits, rng);
}

}  // namespace

TEST(PaillierKeys, TinyKeyConstants) {
  const auto keys = tiny_keys(5, 7);
  EXPECT_EQ(keys.pub.n(), big(35));
  EXPECT_EQ(keys.priv.lambda(), big(12));
  EXPECT_EQ(keys.priv.mu(), big(3));
  // N·N^-1 ≡ 1 modulo N²+2.
  EXPECT_EQ((big(35) * cipherloop::mod_inverse(big(35), big(35 * 35 + 2))) % big(35 * 35 + 2), big(1));
}

TEST(PaillierKeys, RejectsEqualPrimes) {
  EXPECT_THROW(tiny_keys(7, 7), cipherloop::GenerationError);
}

TEST(PaillierKeys, RejectsUnsupportedLength) {
  cipherloop::SeededEntropy rng(1);
  EXPECT_THROW(pl::keygen(63, rng), cipherloop::ParameterError);
  EXPECT_THROW(pl::keygen(100, rng), cipherloop::ParameterError);
}

TEST(PaillierKeys, GeneratedKeysHaveExactLength) {
  for (const std::size_t bits : {64u, 128u, 256u}) {
    const auto keys = seeded_keys(bits, bits);
    EXPECT_EQ(keys.pub.key_bits(), bits);
    EXPECT_EQ(keys.pub.word_count(), bits / 8);
    EXPECT_EQ(keys.priv.ctx_n().word_count(), keys.pub.word_count());
    EXPECT_EQ(keys.priv.ctx_n2p2().word_count(), keys.pub.word_count());
    const auto n2 = oracle::to_mpz(keys.pub.n_squared());
    const auto n2_bits = mpz_sizeinbase(n2.get_mpz_t(), 2);
    EXPECT_TRUE(n2_bits == 2 * bits || n2_bits == 2 * bits - 1);
    const mpz_class lambda = oracle::to_mpz(keys.priv.lambda());
    const mpz_class mu = oracle::to_mpz(keys.priv.mu());
    EXPECT_EQ((lambda * mu) % oracle::to_mpz(keys.pub.n()), 1);
  }
}

TEST(PaillierKeys, PrimalityAgreesWithGmp) {
  cipherloop::SeededEntropy rng(99);
  oracle::Random source(99);
  for (int i = 0; i < 400; ++i) {
    const mpz_class v = source.bits(8 + i % 90) + 2;
    const int expected = mpz_probab_prime_p(v.get_mpz_t(), 40);
    ASSERT_EQ(pl::is_probable_prime(oracle::from_mpz(v), rng), expected != 0) << v.get_str();
  }
}

class TinyKeyExhaustive : public ::testing::TestWithParam<std::pair<unsigned long, unsigned long>> {};

TEST_P(TinyKeyExhaustive, RoundTripForEveryPlaintextAndRandomizer) {
  const auto [p, q] = GetParam();
  const auto keys = tiny_keys(p, q);
  const unsigned long n = p * q;
  for (const unsigned long r : units(n)) {
    const auto z = pl::calc_randomizer(keys.pub, big(r));
    for (unsigned long t = 0; t < n; ++t) {
      ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, pl::encrypt(keys.pub, big(t), z)), big(t)) << "t=" << t << " r=" << r;
    }
  }
}

TEST_P(TinyKeyExhaustive, HomomorphicTables) {
  const auto [p, q] = GetParam();
  const auto keys = tiny_keys(p, q);
  const unsigned long n = p * q;
  const auto rs = units(n);
  std::vector<pl::Ciphertext> cts;
  for (unsigned long t = 0; t < n; ++t) {
    cts.push_back(pl::encrypt(keys.pub, big(t), pl::calc_randomizer(keys.pub, big(rs[t % rs.size()]))));
  }
  for (unsigned long a = 0; a < n; ++a) {
    for (unsigned long b = 0; b < n; ++b) {
      ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, pl::hom_add(keys.pub, cts[a], cts[b])), big((a + b) % n));
      ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, pl::hom_scale(keys.pub, big(a), cts[b])), big((a * b) % n));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(SmallModuli, TinyKeyExhaustive,
                         ::testing::Values(std::pair{3ul, 5ul}, std::pair{5ul, 7ul}, std::pair{7ul, 11ul}));

TEST(PaillierTiny, AdditionWrapsModN) {
  const auto keys = tiny_keys(5, 7);
  const auto c = pl::hom_add(keys.pub, pl::encrypt_deterministic(keys.pub, big(34)),
                             pl::encrypt_deterministic(keys.pub, big(3)));
  EXPECT_EQ(pl::decrypt(keys.priv, keys.pub, c), big(2));
  const auto sum = pl::hom_add(keys.pub, pl::encrypt_deterministic(keys.pub, big(3)),
                               pl::encrypt_deterministic(keys.pub, big(4)));
  EXPECT_EQ(pl::decrypt(keys.priv, keys.pub, sum), big(7));
}

TEST(PaillierTiny, ZeroRandomizerEncryptionsDecryptToZero) {
  const auto keys = tiny_keys(5, 7);
  for (const unsigned long r : units(35)) {
    const auto c = pl::encrypt(keys.pub, big(0), pl::calc_randomizer(keys.pub, big(r)));
    ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, c), big(0));
  }
}

TEST(Paillier, UnitRandomizerAndZeroEncryption) {
  const auto keys = tiny_keys(5, 7);
  const auto& ctx = keys.pub.ctx_n2();
  EXPECT_EQ(pl::calc_randomizer(keys.pub, ctx.r_mod_m() % keys.pub.n()).z.value().is_zero(), false);
  const auto c = pl::encrypt(keys.pub, big(0), pl::unit_randomizer(keys.pub));
  EXPECT_EQ(pl::canonical(keys.pub, c), big(1));
  EXPECT_EQ(pl::encrypt_zero_unit(keys.pub).value.value(), ctx.r_mod_m());
  EXPECT_EQ(pl::decrypt(keys.priv, keys.pub, pl::encrypt_zero_unit(keys.pub)), big(0));
  const auto c9 = pl::encrypt_deterministic(keys.pub, big(9));
  EXPECT_EQ(pl::decrypt(keys.priv, keys.pub, pl::hom_add(keys.pub, pl::encrypt_zero_unit(keys.pub), c9)), big(9));
  EXPECT_EQ(pl::decrypt(keys.priv, keys.pub, pl::hom_scale(keys.pub, big(1), c9)), big(9));
}

TEST(Paillier, RandomizerWithoutPreconversion) {
  const auto keys = seeded_keys(64, 5);
  const mpz_class n = oracle::to_mpz(keys.pub.n());
  const mpz_class n2 = n * n;
  const mpz_class r_inv = oracle::invert(oracle::pow2(keys.pub.ctx_n2().radix_exp()), n2);
  cipherloop::SeededEntropy rng(6);
  for (int i = 0; i < 50; ++i) {
    const BigUint r = pl::sample_randomizer_input(keys.pub, rng);
    const auto z = pl::calc_randomizer(keys.pub, r);
    const mpz_class r_prime = oracle::mod(oracle::to_mpz(r) * r_inv, n2);
    const mpz_class got = oracle::to_mpz(keys.pub.ctx_n2().from_mont(z.z));
    ASSERT_EQ(got, oracle::powm(r_prime, n, n2));
    ASSERT_EQ(got, oracle::powm(r_prime % n, n, n2));
  }
}

TEST(Paillier, BinomialShortcutMatchesGenericExponentiation) {
  const auto keys = seeded_keys(64, 8);
  const mpz_class n = oracle::to_mpz(keys.pub.n());
  const mpz_class n2 = n * n;
  const mpz_class r_inv = oracle::invert(oracle::pow2(keys.pub.ctx_n2().radix_exp()), n2);
  cipherloop::SeededEntropy rng(9);
  for (int i = 0; i < 200; ++i) {
    const BigUint r = pl::sample_randomizer_input(keys.pub, rng);
    const BigUint t = cipherloop::random_below(rng, keys.pub.n());
    const auto c = pl::encrypt(keys.pub, t, pl::calc_randomizer(keys.pub, r));
    const mpz_class r_prime = oracle::mod(oracle::to_mpz(r) * r_inv, n2);
    const mpz_class expected = oracle::mod(oracle::powm(n + 1, oracle::to_mpz(t), n2) * oracle::powm(r_prime, n, n2), n2);
    ASSERT_EQ(oracle::to_mpz(pl::canonical(keys.pub, c)), expected);
  }
}

TEST(Paillier, RandomRoundTripAndHomomorphism64) {
  const auto keys = seeded_keys(64, 10);
  cipherloop::SeededEntropy rng(11);
  const mpz_class n = oracle::to_mpz(keys.pub.n());
  for (int i = 0; i < 1000; ++i) {
    const BigUint a = cipherloop::random_below(rng, keys.pub.n());
    const BigUint b = cipherloop::random_below(rng, keys.pub.n());
    const auto ca = pl::encrypt(keys.pub, a, rng);
    ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, ca), a);
    if (i % 10 == 0) {
      const auto cb = pl::encrypt(keys.pub, b, rng);
      ASSERT_EQ(oracle::to_mpz(pl::decrypt(keys.priv, keys.pub, pl::hom_add(keys.pub, ca, cb))),
                (oracle::to_mpz(a) + oracle::to_mpz(b)) % n);
      ASSERT_EQ(oracle::to_mpz(pl::decrypt(keys.priv, keys.pub, pl::hom_scale(keys.pub, b, ca))),
                (oracle::to_mpz(a) * oracle::to_mpz(b)) % n);
    }
  }
}

TEST(Paillier, RoundTripLargerKeys) {
  for (const std::size_t bits : {128u, 256u}) {
    const auto keys = seeded_keys(bits, 100 + bits);
    cipherloop::SeededEntropy rng(bits);
    for (int i = 0; i < 20; ++i) {
      const BigUint t = cipherloop::random_below(rng, keys.pub.n());
      ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, pl::encrypt(keys.pub, t, rng)), t);
      ASSERT_EQ(pl::decrypt(keys.priv, keys.pub, pl::encrypt(keys.pub, t, rng), cipherloop::ExpSchedule::paired), t);
    }
  }
}

TEST(Paillier, FreshEncryptionsDiffer) {
  const auto keys = seeded_keys(64, 12);
  cipherloop::SystemEntropy rng;
  std::set<std::string> seen;
  for (int i = 0; i < 100; ++i) {
    seen.insert(pl::canonical(keys.pub, pl::encrypt(keys.pub, big(42), rng)).to_hex());
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Paillier, PlaintextRangeChecked) {
  const auto keys = tiny_keys(5, 7);
  EXPECT_THROW(pl::encrypt_deterministic(keys.pub, big(35)), cipherloop::ParameterError);
  EXPECT_THROW(pl::hom_scale(keys.pub, big(35), pl::encrypt_zero_unit(keys.pub)), cipherloop::ParameterError);
}

TEST(Paillier, AdversarialCiphertextDoesNotThrow) {
  const auto keys = tiny_keys(5, 7);
  const auto& ctx = keys.pub.ctx_n2();
  for (unsigned long v : {0ul, 35ul, 70ul, 1225ul}) {
    const BigUint out = pl::decrypt(keys.priv, keys.pub, {ctx.adopt(big(v))});
    EXPECT_LT(out, big(35));
  }
}

TEST(Paillier, KeyMismatchDetected) {
  const auto a = tiny_keys(5, 7);
  const auto b = tiny_keys(7, 11);
  EXPECT_THROW(pl::decrypt(a.priv, b.pub, pl::encrypt_zero_unit(b.pub)), cipherloop::ParameterError);
}

TEST(Paillier, SerializationRoundTrip) {
  const auto keys = seeded_keys(64, 13);
  cipherloop::SeededEntropy rng(14);
  const auto c = pl::encrypt(keys.pub, big(12345), rng);
  const auto bytes = pl::serialize(keys.pub, c);
  EXPECT_EQ(bytes.size(), 18u);
  EXPECT_EQ(pl::deserialize(keys.pub, bytes), c);
  auto shorter = bytes;
  shorter.pop_back();
  EXPECT_THROW(pl::deserialize(keys.pub, shorter), cipherloop::ProtocolError);
  std::vector<std::uint8_t> too_big(bytes.size(), 0xFF);
  EXPECT_THROW(pl::deserialize(keys.pub, too_big), cipherloop::ProtocolError);
}

TEST(Paillier, KeyFilesRoundTrip) {
  const auto keys = seeded_keys(128, 15);
  const auto dir = std::filesystem::temp_directory_path() / "cipherloop_key_test";
  std::filesystem::create_directories(dir);
  const auto pub_path = dir / "key.pub";
  const auto priv_path = dir / "key";
  pl::write_public_key(pub_path, keys.pub);
  pl::write_private_key(priv_path, keys);
  EXPECT_EQ(pl::read_public_key(pub_path), keys.pub);
  const auto loaded = pl::read_key_pair(priv_path);
  EXPECT_EQ(loaded.priv.lambda(), keys.priv.lambda());
  EXPECT_EQ(loaded.priv.mu(), keys.priv.mu());
  const auto perms = std::filesystem::status(priv_path).permissions();
  EXPECT_EQ(perms & std::filesystem::perms::all,
            std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
  // Ciphertexts cross between independently loaded copies of a key.
  cipherloop::SeededEntropy rng(16);
  const auto c = pl::encrypt(pl::read_public_key(pub_path), big(77), rng);
  EXPECT_EQ(pl::decrypt(loaded.priv, loaded.pub, c), big(77));
  std::filesystem::remove_all(dir);
}

TEST(Paillier, CorruptKeyFileRejected) {
  const auto kv = cipherloop::parse_key_values("type = paillier-private\nn = 23\nlambda = c\nmu = 4\np = 5\nq = 7\n");
  EXPECT_THROW(pl::key_pair_from(kv, "test"), cipherloop::ConfigError);
  const auto wrong_type = cipherloop::parse_key_values("type = rsa\nn = 23\n");
  EXPECT_THROW(pl::public_key_from(wrong_type, "test"), cipherloop::ConfigError);
}
