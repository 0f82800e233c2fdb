from setuptools import setup, find_packages

setup(
    name="PLATECELLpkg",
    version="1.0.0",
    packages=find_packages(exclude=["tests", "tests.*"]),
    py_modules=["platecell", "platecell_worker"],
    author_email="who@cares.nomail",
    description="PLATECELL - Periodic homogenization of inhomogeneous plates",
    entry_points={"console_scripts": ["platecell=platecell:main"]},
)
