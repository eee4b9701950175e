# eye-biomarker-study/setup.py

"""
Setup script for the eye biomarker study toolkit
"""

from setuptools import find_packages, setup


def read_requirements():
    """Read runtime requirements from requirements.txt (core section only)"""
    requirements = []
    default_requirements = [
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0.0",
        "matplotlib>=3.7.0",
        "openpyxl>=3.1.0",
        "Pillow>=10.0",
        "python-dateutil>=2.8.0",
    ]
    try:
        with open("requirements.txt", "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line.startswith("# Testing"):
                    break
                if not line or line.startswith("#"):
                    continue
                requirements.append(line.split("#")[0].strip())
    except FileNotFoundError:
        requirements = default_requirements
    return requirements or default_requirements


with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="eye-biomarker-study",
    version="1.0.0",
    description="External-eye photo biomarker study toolkit",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests*", "docs*", "examples*"]),
    py_modules=["main", "run"],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Medical Science Apps.",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.11",
    install_requires=read_requirements(),
    extras_require={"test": ["pytest>=7.4", "pytest-cov>=4.1", "pytest-mock>=3.11"]},
    entry_points={
        "console_scripts": [
            "eye-study=main:main",
        ],
    },
    include_package_data=True,
)
