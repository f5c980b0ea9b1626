"""Build hook for the optional Cython tape kernel.

If Cython or a C compiler is missing the package still installs; the numpy
fallback in hamalg.tape is used instead.
"""
from setuptools import setup
from setuptools.command.build_ext import build_ext

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("hamalg._tape_kernel", ["src/hamalg/_tape_kernel.pyx"],
                   extra_compile_args=["-O2"])],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"warning: skipping compiled tape kernel ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc})")


setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
