#include <cmath>
#include <numeric>

#include "ccftl/fixed_point.hpp"
#include "ccftl/paillier.hpp"
#include "ccftl/rng.hpp"
#include "test_util.hpp"

using namespace ccftl;
using namespace ccftl::fed;

namespace {

const Keypair& test_key() {
  static const Keypair k = keygen(512, 77);
  return k;
}

}  // namespace

TEST_CASE("fixed-point encoding") {
  CHECK(fp_encode(nn::ParamVector(std::vector<double>{1.5})).values[0] == 98304);
  CHECK(fp_encode(nn::ParamVector(std::vector<double>{0.0})).values[0] == 0);
  const double half_ulp = std::ldexp(0.5, -16);
  CHECK(fp_encode(nn::ParamVector(std::vector<double>{half_ulp})).values[0] == 1);
  CHECK(fp_encode(nn::ParamVector(std::vector<double>{-half_ulp})).values[0] == -1);
  CHECK(fp_encode(nn::ParamVector(std::vector<double>{-32768.0})).values[0] == -(std::int64_t{1} << 31));
  CHECK_ERROR_KIND(fp_encode(nn::ParamVector(std::vector<double>{32768.0})), ErrorKind::out_of_range);
  CHECK_ERROR_KIND(fp_encode(nn::ParamVector(std::vector<double>{NAN})), ErrorKind::non_finite);
  CHECK_ERROR_KIND(fp_encode(nn::ParamVector(1), 31), ErrorKind::invalid_argument);

  Rng rng(1);
  nn::ParamVector v(1000);
  for (auto& x : v.values) x = rng.uniform(-1000.0, 1000.0);
  const auto back = fp_decode(fp_encode(v));
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) <= std::ldexp(1.0, -17));
  CHECK(fp_encode(v, 10).scale_bits == 10);
}

TEST_CASE("toy key with n = 35") {
  const auto k = keypair_from_primes(5, 7);
  CHECK(k.pub.n == 35);
  CHECK(k.pub.n_squared == 1225);
  CHECK(encrypt(k.pub, 3, 1) == 106);
  for (int m = 0; m < 35; ++m) {
    for (int r = 1; r < 35; ++r) {
      if (std::gcd(r, 35) != 1) continue;
      const mpz_class c = encrypt(k.pub, m, r);
      CHECK(decrypt(k.pub, k.sec, c) == m);
      if (r > 1) CHECK(c != encrypt(k.pub, m, 1));
    }
  }
  for (int a = 0; a < 35; ++a) {
    for (int b = 0; b < 35; ++b) {
      const mpz_class sum = add_ciphertexts(k.pub, encrypt(k.pub, a, 2), encrypt(k.pub, b, 3));
      CHECK(decrypt(k.pub, k.sec, sum) == (a + b) % 35);
    }
  }
  CHECK_ERROR_KIND(encrypt(k.pub, 35, 1), ErrorKind::out_of_range);
  CHECK_ERROR_KIND(encrypt(k.pub, 1, 5), ErrorKind::crypto);
  CHECK_ERROR_KIND(keypair_from_primes(5, 5), ErrorKind::crypto);
  CHECK_ERROR_KIND(keypair_from_primes(5, 9), ErrorKind::crypto);
}

TEST_CASE("keygen is seeded and sized") {
  const auto a = keygen(256, 1), b = keygen(256, 1), c = keygen(256, 2);
  CHECK(a.pub == b.pub);
  CHECK_FALSE(a.pub == c.pub);
  CHECK(mpz_sizeinbase(a.pub.n.get_mpz_t(), 2) == 256);
  CHECK_ERROR_KIND(keygen(64, 1), ErrorKind::crypto);
  CHECK_ERROR_KIND(keygen(257, 1), ErrorKind::crypto);
}

TEST_CASE("additive homomorphism at 512 bits") {
  const auto& k = test_key();
  NonceSource nonces(5);
  gmp_randclass draws(gmp_randinit_mt);
  draws.seed(9);
  const mpz_class half = k.pub.n / 2;
  for (int t = 0; t < 200; ++t) {
    const mpz_class a = draws.get_z_range(half), b = draws.get_z_range(half);
    const mpz_class ca = encrypt(k.pub, a, nonces.draw(k.pub));
    const mpz_class cb = encrypt(k.pub, b, nonces.draw(k.pub));
    CHECK(decrypt(k.pub, k.sec, ca) == a);
    CHECK(decrypt(k.pub, k.sec, add_ciphertexts(k.pub, ca, cb)) == a + b);
  }
  const mpz_class c = encrypt(k.pub, 42, nonces.draw(k.pub));
  CHECK(decrypt(k.pub, k.sec, add_ciphertexts(k.pub, c, encrypt(k.pub, 0, nonces.draw(k.pub)))) == 42);
  CHECK(encrypt(k.pub, 42, nonces.draw(k.pub)) != encrypt(k.pub, 42, nonces.draw(k.pub)));
}

TEST_CASE("packed vectors sum exactly, negatives included") {
  const auto& k = test_key();
  Rng rng(3);
  nn::ParamVector a(301), b(301);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform(-100.0, 100.0);
    b[i] = rng.uniform(-100.0, 100.0);
  }
  const auto fa = fp_encode(a), fb = fp_encode(b);
  const auto ca = encrypt_vector(k.pub, fa, 1);
  const auto cb = encrypt_vector(k.pub, fb, 2);
  CHECK(ca.count == 301);
  CHECK(ca.slots_per_cipher > 1);
  CHECK(ca.ciphertexts.size() == (301 + ca.slots_per_cipher - 1) / ca.slots_per_cipher);
  CHECK(decrypt_vector(k, ca) == fa);
  const auto sum = decrypt_vector(k, add_cipher(ca, cb));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(sum.values[i] == fa.values[i] + fb.values[i]);

  const auto zero = encrypt_vector(k.pub, fp_encode(nn::ParamVector(301)), 3);
  CHECK(decrypt_vector(k, add_cipher(ca, zero)) == fa);
}

TEST_CASE("vector encryption guards") {
  const auto& k = test_key();
  const auto other = keygen(512, 78);
  const auto f = fp_encode(nn::ParamVector(std::vector<double>{1.0, -2.0, 3.0}));
  const auto c = encrypt_vector(k.pub, f, 1);
  CHECK_ERROR_KIND(add_cipher(c, encrypt_vector(other.pub, f, 1)), ErrorKind::crypto);
  CHECK_ERROR_KIND(decrypt_vector(other, c), ErrorKind::crypto);

  // Two bits of headroom allow four addends.
  auto acc = encrypt_vector(k.pub, f, 2, 2);
  for (int i = 0; i < 3; ++i) acc = add_cipher(acc, encrypt_vector(k.pub, f, 10 + i, 2));
  CHECK(acc.addends == 4);
  CHECK(decrypt_vector(k, acc).values[1] == 4 * f.values[1]);
  CHECK_ERROR_KIND(add_cipher(acc, encrypt_vector(k.pub, f, 20, 2)), ErrorKind::out_of_range);
  CHECK_ERROR_KIND(add_cipher(acc, c), ErrorKind::crypto);
}

TEST_CASE("decrypting with the wrong key is detected") {
  const auto& k = test_key();
  const auto other = keygen(512, 79);
  auto c = encrypt_vector(k.pub, fp_encode(nn::ParamVector(std::vector<double>(50, 0.25))), 4);
  c.modulus = other.pub.n;  // pretend the ciphertexts belong to the other key
  CHECK_ERROR_KIND(decrypt_vector(other, c), ErrorKind::crypto);
}
